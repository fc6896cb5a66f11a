"""Regenerate the bundled webpage-network stand-ins.

The three shipped datasets are synthetic directed graphs shaped to the
published summary statistics of the WebKB trio (node/edge/feature/class
counts, edge homophily, class imbalance, hub-heavy out-degrees) while
keeping the package self-contained: no scraped text, no licensing baggage,
fully deterministic.

The link texture mimics what makes the real webpage networks hard for
message passing. Links rarely join same-type pages. Every minority page is
linked from one index page; on top of that a minority page comes in one of
five flavors: "dosed" pages also receive two links from connector pages of
one other minority type, "backed" pages receive one link from a connector
page of their own type, "listing" pages read like dominant-class listings
(their word profile wears the dominant block) and receive one link from a
listing page of another minority type, "stub" pages carry no signal
vocabulary at all, and "plain" pages sit behind nothing but their index
link. Index pages (class 4) carry a tiny boilerplate stamp
and nothing else; part of them chain in a ring, and the rest are
"overgrown": filed under the index type but wearing the full dominant-class
word profile, with no links at all. Dominant class 2 pages (wordy listing
boilerplate) split into quiet ones with no in-links and busy ones picking
up an index-page link plus a link from a listing-flavored page or from
another dominant page. Out-degree mass piles onto listing, connector and
index pages, in-degrees stay small, matching the sparse directed profile
of the real webpage graphs.

Run from the repository root:

    python3 tools/make_bundled_datasets.py

Knobs below are frozen; regenerating with the same file gives byte-identical
datasets.
"""

import sys
import zlib
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gattrim.dataio import save_graph
from gattrim.graph import edge_homophily, make_graph

FEATURE_DIM = 1703
MASTER_SEED = 20240117
HUB_CLASS = 2
QUIET_CLASS = 4

# class_sizes: imbalanced, largest class dominant (webpage type "student").
# proper: directed non-self records; same: how many join same-label pages;
# selfs: nodes carrying an explicit self-loop line in edges.tsv; ring: how
# many index pages join the ring; overgrown: index pages wearing the full
# dominant-class profile; roles: per minority class
# (dosed, listing, stub, backed, plain) counts, plain pages sitting behind
# nothing but their index link; busy: dominant-class pages that receive
# links, hub_fed of them fed by another dominant page rather than a
# listing page; conns: connector pages per minority class, ascending
# class order.
SPECS = {
    "cornell": dict(num_nodes=183, class_sizes=(25, 17, 83, 36, 22),
                    proper=280, same=36, selfs=15, ring=10, overgrown=12,
                    roles={0: (12, 4, 0, 7, 2), 1: (0, 8, 6, 0, 3),
                           3: (10, 3, 0, 10, 13)},
                    busy=58, hub_fed=9, conns=(3, 3, 3)),
    "texas": dict(num_nodes=183, class_sizes=(24, 16, 103, 22, 18),
                  proper=295, same=31, selfs=14, ring=8, overgrown=10,
                  roles={0: (10, 4, 2, 8, 0), 1: (0, 7, 6, 0, 3),
                         3: (8, 4, 0, 6, 4)},
                  busy=80, hub_fed=9, conns=(4, 3, 4)),
    "wisconsin": dict(num_nodes=251, class_sizes=(28, 71, 118, 18, 16),
                      proper=466, same=93, selfs=33, ring=8, overgrown=8,
                      roles={0: (8, 5, 1, 14, 0), 1: (12, 6, 2, 51, 0),
                             3: (0, 5, 3, 10, 0)},
                      busy=105, hub_fed=10, conns=(3, 3, 2)),
}

# Feature model: each class owns a 30-dim block of signal words activated
# at SIGNAL_RATE, on top of a shared common vocabulary and background
# noise. Dominant-class pages run hotter and wordier (HUB_RATE, HUB_AMP):
# listing boilerplate repeats its vocabulary, and listing-flavored minority
# pages and overgrown index pages wear the same hot block. Connector pages
# run at the same intensity on their own class block. Ring index pages
# carry a fixed boilerplate stamp (inside the class's block) and nothing
# else; stub pages skip the signal block.
SIGNAL_BLOCK = 30
SIGNAL_RATE = 0.5
HUB_RATE = 0.85
HUB_AMP = 2.0
STAMP = slice(QUIET_CLASS * SIGNAL_BLOCK, QUIET_CLASS * SIGNAL_BLOCK + 8)
COMMON_DIMS = slice(300, 520)
COMMON_RATE = 0.04
NOISE_RATE = 0.004

# dosed pages receive this many links from connectors of one other
# minority class; the poisoning class alternates between the two options
# so no single wiring pattern dominates a class
POISON_DOSE = 2


def make_labels(rng, class_sizes):
    labels = np.repeat(np.arange(len(class_sizes)), class_sizes)
    return rng.permutation(labels)


def make_features(rng, labels, listing, stubs, overgrown, conns):
    n = labels.shape[0]
    x = (rng.random((n, FEATURE_DIM)) < NOISE_RATE).astype(np.float64)
    common = rng.random((n, COMMON_DIMS.stop - COMMON_DIMS.start)) < COMMON_RATE
    x[:, COMMON_DIMS] = np.maximum(x[:, COMMON_DIMS], common)

    for i in np.flatnonzero(labels == QUIET_CLASS):
        if i in overgrown:
            continue
        x[i] = 0.0
        x[i, STAMP] = 1.0

    for i in range(n):
        if i in stubs or (labels[i] == QUIET_CLASS and i not in overgrown):
            continue
        # connector pages are wordy link pages of their own type, so they
        # run at listing-like intensity on their own block
        hot = (labels[i] == HUB_CLASS or i in listing or i in overgrown
               or i in conns)
        eff = HUB_CLASS if (hot and i not in conns) else labels[i]
        rate = HUB_RATE if hot else SIGNAL_RATE
        amp = HUB_AMP if hot else 1.0
        block = slice(eff * SIGNAL_BLOCK, (eff + 1) * SIGNAL_BLOCK)
        hits = (rng.random(SIGNAL_BLOCK) < rate) * amp
        x[i, block] = np.maximum(x[i, block], hits)
    return x


def _add_record(taken, records, a, b):
    # budgets close exactly, so a duplicate means the wiring is wrong
    if a == b or (a, b) in taken:
        raise RuntimeError(f"duplicate or self record ({a}, {b})")
    taken.add((a, b))
    records.append((a, b))


def quiet_ring(rng, ring_pages, taken, records):
    """Directed ring over the linked index pages."""
    seq = rng.permutation(ring_pages)
    for i in range(seq.size):
        _add_record(taken, records, int(seq[i]), int(seq[(i + 1) % seq.size]))


def assign_roles(rng, labels, spec):
    """Split each minority class into dosed / listing / stub / backed /
    plain."""
    out = ([], [], [], [], [])
    for c, quota in spec["roles"].items():
        members = rng.permutation(np.flatnonzero(labels == c))
        if sum(quota) != members.size:
            raise RuntimeError(f"role split for class {c} does not cover it")
        members = [int(m) for m in members]
        at = 0
        for pool, q in zip(out, quota):
            pool += members[at:at + q]
            at += q
    return out


def build(name, spec, out_root):
    rng = np.random.default_rng([MASTER_SEED, zlib.crc32(name.encode())])
    num_classes = len(spec["class_sizes"])
    labels = make_labels(rng, spec["class_sizes"])

    hub_nodes = np.flatnonzero(labels == HUB_CLASS)
    quiet_nodes = np.flatnonzero(labels == QUIET_CLASS)
    minor_classes = sorted(spec["roles"])
    minor_nodes = np.flatnonzero(np.isin(labels, minor_classes))

    dosed, listing, stubs, backed, _plain = assign_roles(rng, labels, spec)
    listing_set = set(listing)
    listing_by_class = {c: [m for m in listing if labels[m] == c]
                        for c in minor_classes}

    # index pages either join the ring or sit overgrown and unlinked
    quiet_order = rng.permutation(quiet_nodes)
    if spec["ring"] + spec["overgrown"] != quiet_order.size:
        raise RuntimeError(f"{name}: index page split does not cover class")
    overgrown = set(int(q) for q in quiet_order[:spec["overgrown"]])
    ring_pages = quiet_order[spec["overgrown"]:]

    # dominant-class page roles
    hub_order = rng.permutation(hub_nodes)
    busy = hub_order[:spec["busy"]]
    plain_hubs = hub_order[spec["busy"]:]

    # connectors carry their class's real word profile, so they come from
    # the dosed/backed pool, never from listing or stub pages
    connectors = {}
    excluded = listing_set | set(stubs)
    for c, k in zip(minor_classes, spec["conns"]):
        pool = np.array([m for m in np.flatnonzero(labels == c)
                         if int(m) not in excluded])
        connectors[c] = rng.choice(pool, size=k, replace=False)

    conn_set = set(int(x) for pool in connectors.values() for x in pool)
    features = make_features(rng, labels, listing_set, set(stubs), overgrown,
                             conn_set)

    taken = set()
    records = []
    quiet_ring(rng, ring_pages, taken, records)

    # listing pages: one link from a listing page of another minority type
    for node in listing:
        foreign = [k for k in minor_classes if k != labels[node]]
        k = foreign[rng.integers(len(foreign))]
        pool = listing_by_class[k]
        _add_record(taken, records, pool[rng.integers(len(pool))], node)

    # backed pages: one link from an own-type connector
    for node in backed:
        pool = [int(x) for x in connectors[labels[node]] if int(x) != node]
        _add_record(taken, records, pool[rng.integers(len(pool))], node)

    # busy dominant-class pages: one link from another dominant page or
    # from a listing-flavored minority page, plus one index-page link
    donors = rng.permutation(plain_hubs)
    feeders = rng.permutation(ring_pages)
    at = 0
    list_order = rng.permutation(np.array(listing))
    for i, h in enumerate(busy):
        if i < spec["hub_fed"]:
            _add_record(taken, records, int(donors[i % donors.size]), int(h))
        else:
            _add_record(taken, records,
                        int(list_order[i % list_order.size]), int(h))
        _add_record(taken, records, int(feeders[at % feeders.size]), int(h))
        at += 1

    # one index-page in-link per minority page, round-robin over a fixed
    # shuffle so index out-degrees stay even
    for node in minor_nodes:
        _add_record(taken, records, int(feeders[at % feeders.size]), int(node))
        at += 1

    # doses: POISON_DOSE in-links from connectors of one other minority
    # class, alternating which one so wiring patterns stay varied
    for j, node in enumerate(dosed):
        foreign = [k for k in minor_classes if k != labels[node]]
        k = foreign[j % len(foreign)]
        pool = rng.permutation(connectors[k])[:POISON_DOSE]
        for conn in pool:
            _add_record(taken, records, int(conn), int(node))

    if len(records) != spec["proper"]:
        raise RuntimeError(f"{name}: built {len(records)} records, "
                           f"spec says {spec['proper']}")

    # explicit self-loop lines go to pages whose in-profile they cannot
    # disturb: linkless dominant pages first, then index pages, then backed
    recs = np.array(records)
    loop_pool = ([int(x) for x in donors] +
                 [int(x) for x in rng.permutation(quiet_nodes)] +
                 [int(x) for x in rng.permutation(np.array(backed))])
    loop_nodes = np.array(loop_pool[:spec["selfs"]])
    if loop_nodes.size != spec["selfs"]:
        raise RuntimeError(f"{name}: not enough self-loop hosts")

    src = np.concatenate([recs[:, 0], loop_nodes])
    dst = np.concatenate([recs[:, 1], loop_nodes])
    g = make_graph(spec["num_nodes"], num_classes, src, dst, features,
                   labels, undirected=False, symmetrize=False)

    out_dir = out_root / name
    save_graph(g, out_dir)
    same = int(np.sum(labels[recs[:, 0]] == labels[recs[:, 1]]))
    if same != spec["same"]:
        raise RuntimeError(f"{name}: {same} same-label records, "
                           f"spec says {spec['same']}")
    print(f"{name}: nodes={g.num_nodes} edges={g.num_edges} "
          f"features={g.features.shape[1]} classes={g.num_classes} "
          f"homophily={edge_homophily(g):.4f} same-label records={same}")


def main():
    out_root = (Path(__file__).resolve().parent.parent
                / "src" / "gattrim" / "datasets")
    for name, spec in SPECS.items():
        build(name, spec, out_root)


if __name__ == "__main__":
    main()
