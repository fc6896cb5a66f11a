"""Exception hierarchy shared across the package.

Every error raised by the library derives from GattrimError. The CLI maps the
major branches to distinct exit codes so scripted callers can tell usage
mistakes from data problems from numeric failures.
"""


class GattrimError(Exception):
    """Base class for all package errors."""


class ConfigError(GattrimError):
    """Invalid configuration value or argument combination."""


# ---------------------------------------------------------------- dataset I/O

class DatasetError(GattrimError):
    """Base class for dataset-directory problems."""


class MissingDatasetFileError(DatasetError):
    def __init__(self, path):
        super().__init__(f"missing dataset file: {path}")
        self.path = str(path)


class MalformedLineError(DatasetError):
    def __init__(self, path, line_no, detail):
        super().__init__(f"{path}:{line_no}: {detail}")
        self.path = str(path)
        self.line_no = line_no


class IndexOutOfRangeError(DatasetError):
    def __init__(self, path, line_no, detail):
        super().__init__(f"{path}:{line_no}: {detail}")
        self.path = str(path)
        self.line_no = line_no


class DuplicateEdgeError(DatasetError):
    def __init__(self, path, line_no, detail):
        super().__init__(f"{path}:{line_no}: {detail}")
        self.path = str(path)
        self.line_no = line_no


# ------------------------------------------------------------------ graph ops

class GraphError(GattrimError):
    """Structural or statistical graph operation failure."""


class InvalidGraphError(GraphError):
    """Graph construction arguments violate a structural invariant."""

    def __init__(self, detail):
        super().__init__(detail)


class UndefinedRatioError(GraphError):
    """A ratio over an empty edge set was requested."""


class UnknownLabelError(GraphError):
    """An operation that needs labels met an unknown one."""


class InfeasibleGraphError(GraphError):
    """Requested synthetic graph parameters cannot be realized."""


# ------------------------------------------------------------------- autodiff

class AutodiffError(GattrimError):
    pass


class ShapeMismatchError(AutodiffError):
    def __init__(self, op, shape_a, shape_b):
        super().__init__(f"{op}: incompatible shapes {shape_a} and {shape_b}")
        self.shapes = (tuple(shape_a), tuple(shape_b))


class EmptySegmentError(AutodiffError):
    def __init__(self, node):
        super().__init__(f"segment_softmax: node {node} has no incoming edges")
        self.node = int(node)


class NonScalarLossError(AutodiffError):
    def __init__(self, shape):
        super().__init__(f"backward requires a (1, 1) loss, got {tuple(shape)}")


# --------------------------------------------------------------------- models

class ModelError(GattrimError):
    pass


class VariantError(ModelError):
    """Unsupported model variant or variant/graph-size combination."""


class NonFiniteError(ModelError):
    def __init__(self, where):
        super().__init__(f"non-finite activation in {where}")
        self.where = where


class MissingSelfLoopError(ModelError):
    def __init__(self, node):
        super().__init__(f"node {node} has no self-loop")
        self.node = int(node)


class EmptyIndexError(ModelError):
    """An index set that must be non-empty is empty."""


# ----------------------------------------------------------------- clustering

class ClusteringError(GattrimError):
    pass


class ClusterCountError(ClusteringError):
    """k exceeds the number of points, or k < 1."""


class EmptyClusterError(ClusteringError):
    def __init__(self, cluster):
        super().__init__(f"cluster {cluster} has no assigned points")
        self.cluster = int(cluster)


class LengthMismatchError(ClusteringError):
    def __init__(self, detail):
        super().__init__(detail)


# ------------------------------------------------------------------- trimming

class TrimError(GattrimError):
    pass


class ClusterRangeError(TrimError):
    def __init__(self, c, k):
        super().__init__(f"cluster index {c} out of range [0, {k})")


class SizeMismatchError(TrimError):
    def __init__(self, detail):
        super().__init__(detail)


# -------------------------------------------------------------------- metrics

class MetricError(GattrimError):
    pass


class SingleClassError(MetricError):
    """Silhouette needs at least two classes."""
