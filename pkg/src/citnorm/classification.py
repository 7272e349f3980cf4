"""Algorithmic field classification from the direct-citation graph.

Pipeline: build an undirected citation graph over a publication set
(direction ignored, mutual citations collapse to one link), normalize
edge weights so each publication contributes about unit total weight,
take the largest connected component, cluster it by maximizing

    Q(partition) = sum over same-cluster pairs i<j of (w_ij - gamma)

with a seeded local-moving heuristic plus cluster-level refinement,
enforce a minimum cluster size by merging, and finally attach the
publications outside the component to the cluster they are most strongly
bibliographically coupled with. Higher ``resolution`` (gamma) yields
more, smaller fields.

Edge weights use w_ij = (1/k_i + 1/k_j) / 2 where k is a node's raw
citation-link count, so densely citing fields do not dominate and fields
come out at comparable size. Externally supplied classifications (the
journal-subject-category style, possibly multi-assignment) are hosted by
the same ClassificationSystem type.
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import Corpus

log = logging.getLogger(__name__)

# Table of preset granularity levels: resolution, minimum cluster size.
PRESETS = {
    "A": (1e-7, 100_000),
    "B": (5e-7, 10_000),
    "C": (5e-6, 2_000),
}


@dataclass(frozen=True)
class ClusteringParams:
    resolution: float
    min_cluster_size: int = 1
    seed: int = 0
    restarts: int = 5

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    @classmethod
    def preset(cls, name: str, seed: int = 0, restarts: int = 5) -> "ClusteringParams":
        resolution, min_size = PRESETS[name]
        return cls(resolution=resolution, min_cluster_size=min_size, seed=seed,
                   restarts=restarts)


@dataclass
class CitationGraph:
    """Undirected weighted citation graph; no self loops, symmetric adjacency."""

    adjacency: dict[int, dict[int, float]]

    @property
    def nodes(self) -> list[int]:
        return sorted(self.adjacency)

    def edge_list(self) -> list[tuple[int, int, float]]:
        return sorted(
            (a, b, w) for a, nbrs in self.adjacency.items() for b, w in nbrs.items() if a < b
        )

    @property
    def node_strength(self) -> dict[int, float]:
        return {n: sum(nbrs.values()) for n, nbrs in self.adjacency.items()}

    def subgraph(self, keep: set[int]) -> "CitationGraph":
        return CitationGraph(
            adjacency={
                n: {m: w for m, w in nbrs.items() if m in keep}
                for n, nbrs in self.adjacency.items()
                if n in keep
            }
        )


@dataclass
class BuildReport:
    """Stage counts from build_classification."""

    input_pubs: int = 0
    graph_edges: int = 0
    largest_component: int = 0
    clusters_raw: int = 0
    clusters_final: int = 0
    attached: int = 0
    unassigned: int = 0


@dataclass
class ClassificationSystem:
    """Publication -> field assignment; algorithmic systems are single-field."""

    name: str
    assignment: dict[int, frozenset]
    multi_assignment: bool = False
    build_report: BuildReport | None = None

    def __post_init__(self):
        for pid, fields_ in self.assignment.items():
            if not fields_:
                raise ValueError(f"publication {pid} assigned to no field")
            if not self.multi_assignment and len(fields_) != 1:
                raise ValueError(f"publication {pid} has {len(fields_)} fields in a "
                                 "single-assignment system")

    @property
    def field_count(self) -> int:
        return len(self.fields())

    def fields(self) -> set:
        out = set()
        for fields_ in self.assignment.values():
            out |= fields_
        return out

    def single_field(self, pub_id: int):
        (f,) = self.assignment[pub_id]
        return f

    def members(self, field_id) -> set[int]:
        return {p for p, fs in self.assignment.items() if field_id in fs}

    def mean_fields_per_pub(self) -> float:
        if not self.assignment:
            return 0.0
        return sum(len(fs) for fs in self.assignment.values()) / len(self.assignment)


def build_graph(corpus: Corpus, pubs: set[int]) -> CitationGraph:
    """Undirected normalized citation graph over ``pubs``.

    Every citing-cited pair inside ``pubs`` becomes one link regardless of
    direction or mutuality; weights are w_ij = (1/k_i + 1/k_j)/2 over raw
    link counts k.
    """
    links: set[tuple[int, int]] = set()
    for pid in pubs:
        for target in corpus.forward_index.get(pid, ()):
            if target in pubs and target != pid:
                links.add((pid, target) if pid < target else (target, pid))

    degree = Counter()
    for a, b in links:
        degree[a] += 1
        degree[b] += 1

    adjacency: dict[int, dict[int, float]] = {p: {} for p in pubs}
    for a, b in links:
        w = 0.5 * (1.0 / degree[a] + 1.0 / degree[b])
        adjacency[a][b] = w
        adjacency[b][a] = w
    return CitationGraph(adjacency=adjacency)


def largest_component(graph: CitationGraph) -> set[int]:
    """Node set of the largest connected component.

    Ties break toward the component containing the smallest node id.
    Isolated nodes form singleton components.
    """
    seen: set[int] = set()
    best: set[int] = set()
    best_key = None
    for start in sorted(graph.adjacency):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nbr in graph.adjacency[node]:
                if nbr not in comp:
                    comp.add(nbr)
                    stack.append(nbr)
        seen |= comp
        key = (-len(comp), min(comp))
        if best_key is None or key < best_key:
            best, best_key = comp, key
    return best


def partition_quality(graph: CitationGraph, labels: dict[int, int], gamma: float) -> float:
    """Q = within-cluster edge weight minus gamma per same-cluster pair."""
    q = 0.0
    for a, b, w in graph.edge_list():
        if labels[a] == labels[b]:
            q += w
    sizes = Counter(labels.values())
    q -= gamma * sum(n * (n - 1) // 2 for n in sizes.values())
    return q


def _canonical_labels(nodes: list[int], labels: dict[int, int]) -> tuple[int, ...]:
    """Relabel clusters by first appearance over sorted nodes."""
    mapping: dict[int, int] = {}
    out = []
    for n in nodes:
        c = labels[n]
        if c not in mapping:
            mapping[c] = len(mapping)
        out.append(mapping[c])
    return tuple(out)


def _local_move(
    neighbors: list[list[tuple[int, float]]],
    sizes: list[int],
    gamma: float,
    rng: random.Random,
) -> list[int]:
    """One level of local moving from a singleton start; returns labels."""
    n = len(neighbors)
    labels = list(range(n))
    cluster_size = sizes[:]  # by cluster id; starts singleton
    free_ids: list[int] = []
    order = list(range(n))
    moved = True
    while moved:
        moved = False
        rng.shuffle(order)
        for v in order:
            cur = labels[v]
            sv = sizes[v]
            # total edge weight from v to each adjacent cluster
            link: dict[int, float] = {}
            for u, w in neighbors[v]:
                link[labels[u]] = link.get(labels[u], 0.0) + w
            # gain of leaving the current cluster
            leave = -(link.get(cur, 0.0) - gamma * sv * (cluster_size[cur] - sv))
            best_gain, best_cluster = 0.0, cur
            for c, w_vc in link.items():
                if c == cur:
                    continue
                gain = leave + (w_vc - gamma * sv * cluster_size[c])
                if gain > best_gain + 1e-12 or (
                    gain > best_gain - 1e-12 and best_cluster != cur and c < best_cluster
                ):
                    best_gain, best_cluster = gain, c
            # splitting off into an empty cluster
            if leave > best_gain + 1e-12 and cluster_size[cur] > sv and free_ids:
                best_gain, best_cluster = leave, free_ids[-1]
            if best_cluster != cur:
                if free_ids and best_cluster == free_ids[-1]:
                    free_ids.pop()
                labels[v] = best_cluster
                cluster_size[cur] -= sv
                cluster_size[best_cluster] += sv
                if cluster_size[cur] == 0:
                    free_ids.append(cur)
                moved = True
    return labels


def _aggregate(
    neighbors: list[list[tuple[int, float]]], sizes: list[int], labels: list[int]
) -> tuple[list[list[tuple[int, float]]], list[int], list[int]]:
    """Collapse clusters to nodes; intra-cluster weights drop out of moves."""
    ids = sorted(set(labels))
    remap = {c: i for i, c in enumerate(ids)}
    coarse = [remap[c] for c in labels]
    agg_sizes = [0] * len(ids)
    for v, c in enumerate(coarse):
        agg_sizes[c] += sizes[v]
    weights: dict[tuple[int, int], float] = {}
    for v, nbrs in enumerate(neighbors):
        cv = coarse[v]
        for u, w in nbrs:
            cu = coarse[u]
            if cv < cu:
                weights[(cv, cu)] = weights.get((cv, cu), 0.0) + w
    agg_neighbors: list[list[tuple[int, float]]] = [[] for _ in ids]
    for (a, b), w in weights.items():
        agg_neighbors[a].append((b, w))
        agg_neighbors[b].append((a, w))
    return agg_neighbors, agg_sizes, coarse


def _cluster_once(
    neighbors: list[list[tuple[int, float]]], sizes: list[int], gamma: float,
    rng: random.Random,
) -> list[int]:
    labels = _local_move(neighbors, sizes, gamma, rng)
    if len(set(labels)) == len(labels):
        return labels
    agg_neighbors, agg_sizes, coarse = _aggregate(neighbors, sizes, labels)
    if len(agg_sizes) == len(sizes):
        return labels
    refined = _cluster_once(agg_neighbors, agg_sizes, gamma, rng)
    return [refined[coarse[v]] for v in range(len(sizes))]


def _enforce_min_size(
    graph: CitationGraph, labels: dict[int, int], min_size: int
) -> dict[int, int]:
    """Merge undersized clusters until all comply (or one cluster remains).

    The smallest undersized cluster merges into the neighboring cluster
    with the largest total connecting weight; without any connection it
    merges into the smallest compliant cluster (smallest other cluster if
    none complies). Deterministic: ties resolve by smallest member id.
    """
    labels = dict(labels)
    while True:
        members: dict[int, list[int]] = {}
        for node, c in labels.items():
            members.setdefault(c, []).append(node)
        if len(members) <= 1:
            break
        undersized = [c for c, m in members.items() if len(m) < min_size]
        if not undersized:
            break
        victim = min(undersized, key=lambda c: (len(members[c]), min(members[c])))
        conn: dict[int, float] = {}
        for node in members[victim]:
            for nbr, w in graph.adjacency[node].items():
                c = labels[nbr]
                if c != victim:
                    conn[c] = conn.get(c, 0.0) + w
        if conn:
            target = max(conn, key=lambda c: (conn[c], -len(members[c]), -min(members[c])))
        else:
            compliant = [c for c in members if c != victim and len(members[c]) >= min_size]
            pool = compliant or [c for c in members if c != victim]
            target = min(pool, key=lambda c: (len(members[c]), min(members[c])))
        for node in members[victim]:
            labels[node] = target
    return labels


def cluster(graph: CitationGraph, params: ClusteringParams,
            threads: int = 1) -> ClassificationSystem:
    """Cluster a citation graph into fields.

    Runs ``params.restarts`` independently seeded local-moving passes,
    keeps the best-quality partition (ties to the lexicographically
    smallest canonical labeling), then enforces the minimum cluster size.
    Deterministic for a fixed seed regardless of thread count.
    """
    nodes = graph.nodes
    if not nodes:
        raise ValueError("cannot cluster an empty graph")
    if len(nodes) < params.min_cluster_size:
        log.warning(
            "graph has %d nodes, below min_cluster_size %d: single cluster",
            len(nodes), params.min_cluster_size,
        )
    index = {n: i for i, n in enumerate(nodes)}
    neighbors: list[list[tuple[int, float]]] = [[] for _ in nodes]
    for a, b, w in graph.edge_list():
        neighbors[index[a]].append((index[b], w))
        neighbors[index[b]].append((index[a], w))
    sizes = [1] * len(nodes)

    def one_restart(i: int) -> list[int]:
        rng = random.Random(f"{params.seed}:{i}")
        return _cluster_once(neighbors, sizes, params.resolution, rng)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one_restart, range(params.restarts)))
    else:
        runs = [one_restart(i) for i in range(params.restarts)]

    best_labels: dict[int, int] | None = None
    best_q = best_canon = None
    for flat in runs:
        labels = {n: flat[index[n]] for n in nodes}
        q = partition_quality(graph, labels, params.resolution)
        canon = _canonical_labels(nodes, labels)
        if best_q is None or q > best_q or (q == best_q and canon < best_canon):
            best_labels, best_q, best_canon = labels, q, canon

    final = _enforce_min_size(graph, best_labels, params.min_cluster_size)
    return _system_from_labels("clustered", final)


def _system_from_labels(name: str, labels: dict[int, int]) -> ClassificationSystem:
    """Number fields 1..m by ascending smallest member id."""
    members: dict[int, list[int]] = {}
    for node, c in labels.items():
        members.setdefault(c, []).append(node)
    ordered = sorted(members.values(), key=min)
    assignment = {
        node: frozenset({fid}) for fid, nodes in enumerate(ordered, start=1) for node in nodes
    }
    return ClassificationSystem(name=name, assignment=assignment, multi_assignment=False)


def attach_remainder(
    corpus: Corpus, system: ClassificationSystem, unassigned: set[int]
) -> ClassificationSystem:
    """Attach publications by bibliographic coupling with assigned ones.

    A candidate joins the field against which it shares the most cited
    references (summed over that field's members); ties go to the field
    with more members, then the lower field id. Zero coupling leaves a
    publication unassigned. Existing assignments never change; coupling
    counts are taken against the original assignment only.
    """
    if not system.fields():
        raise ValueError("system has no fields")
    field_size = Counter()
    for fields_ in system.assignment.values():
        field_size.update(fields_)

    new_assignment = dict(system.assignment)
    attached = 0
    for pid in sorted(unassigned):
        if pid in system.assignment:
            continue
        coupling = Counter()
        for ref in corpus.forward_index.get(pid, ()):
            for co_citer in corpus.reverse_index.get(ref, ()):
                if co_citer == pid:
                    continue
                for f in system.assignment.get(co_citer, ()):
                    coupling[f] += 1
        if not coupling:
            continue
        # strongest coupling, then larger field, then lower field id
        best = min(coupling, key=lambda f: (-coupling[f], -field_size[f], f))
        new_assignment[pid] = frozenset({best})
        attached += 1

    out = ClassificationSystem(
        name=system.name, assignment=new_assignment, multi_assignment=system.multi_assignment,
        build_report=system.build_report,
    )
    if out.build_report is not None:
        out.build_report.attached = attached
    return out


def build_classification(
    corpus: Corpus, pubs: set[int], params: ClusteringParams, name: str,
    threads: int = 1,
) -> ClassificationSystem:
    """Full pipeline: graph, largest component, clustering, attachment."""
    report = BuildReport(input_pubs=len(pubs))
    graph = build_graph(corpus, pubs)
    report.graph_edges = len(graph.edge_list())
    component = largest_component(graph)
    report.largest_component = len(component)
    if not component:
        raise ValueError("citation graph is empty; nothing to classify")
    system = cluster(graph.subgraph(component), params, threads=threads)
    report.clusters_raw = system.field_count
    system = ClassificationSystem(
        name=name, assignment=system.assignment, multi_assignment=False, build_report=report
    )
    system = attach_remainder(corpus, system, pubs - component)
    report.clusters_final = system.field_count
    report.unassigned = len(pubs) - len(system.assignment)
    return system


def save_classification_csv(system: ClassificationSystem, path) -> None:
    """CSV rows pub_id,field_id; multi-assignment repeats the pub id."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("pub_id,field_id\n")
        for pid in sorted(system.assignment):
            for f in sorted(system.assignment[pid], key=str):
                fh.write(f"{pid},{f}\n")


def load_external_classification(
    path, corpus: Corpus | None = None, name: str = "external",
    multi_assignment: bool = True,
) -> ClassificationSystem:
    """Load a pub_id,field_id CSV (header optional).

    Rows naming publications outside the corpus are skipped with a
    warning; integer-looking field ids are parsed as ints.
    """
    assignment: dict[int, set] = {}
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or (line_no == 1 and line.lower() == "pub_id,field_id"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'pub_id,field_id'")
            pid = int(parts[0])
            fid = int(parts[1]) if parts[1].lstrip("-").isdigit() else parts[1]
            if corpus is not None and pid not in corpus.publications:
                skipped += 1
                continue
            assignment.setdefault(pid, set()).add(fid)
    if skipped:
        log.warning("skipped %d classification rows for unknown publications", skipped)
    return ClassificationSystem(
        name=name,
        assignment={p: frozenset(fs) for p, fs in assignment.items()},
        multi_assignment=multi_assignment,
    )
