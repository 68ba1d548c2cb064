"""Readers and writers for graph, schedule, design and result files.

Graphs, schedules and designs are JSON documents.  A path of the form
``bundled:NAME`` resolves to ``NAME.json`` among the packaged example
assets (``g1``, ``g2``, ``g3``, ``fixed_g1``, ``switching``).
"""

import csv
import json
import math
import platform
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidGraph, ParseError
from .graph import MatrixGraph
from .schedule import TopologySchedule
from .structure import Decomposition, find_decomposition
from .synthesis import synthesize

BUNDLED_PREFIX = "bundled:"


def resolve(path):
    """Turn ``bundled:NAME`` into a real path; other paths pass through."""
    text = str(path)
    if text.startswith(BUNDLED_PREFIX):
        name = text[len(BUNDLED_PREFIX):]
        ref = resources.files("ntcons") / "assets" / f"{name}.json"
        if not ref.is_file():
            raise ParseError(f"no bundled asset named {name!r}")
        return Path(str(ref))
    return Path(text)


def bundled_names():
    return sorted(p.name[:-5] for p in (resources.files("ntcons") / "assets").iterdir()
                  if p.name.endswith(".json"))


def _load_json(path):
    path = resolve(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text), path
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _field(doc, key, where, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise ParseError(f"{where}: missing field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise ParseError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def parse_graph_doc(doc, where="graph"):
    """Return ``(n_agents, dim, edges)`` from a parsed graph document without validating weights."""
    n = _field(doc, "n_agents", where, int)
    d = _field(doc, "dim", where, int)
    raw_edges = _field(doc, "edges", where, list)
    edges = {}
    for k, e in enumerate(raw_edges):
        loc = f"{where}.edges[{k}]"
        to = _field(e, "to", loc, int)
        frm = _field(e, "from", loc, int)
        m = _field(e, "matrix", loc, list)
        if not all(isinstance(r, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                               for v in r) for r in m):
            raise ParseError(f"{loc}.matrix: expected a list of numeric rows")
        if len({len(r) for r in m}) > 1:
            raise ParseError(f"{loc}.matrix: ragged rows")
        if (to, frm) in edges:
            raise ParseError(f"{loc}: duplicate edge {frm}->{to}")
        edges[(to, frm)] = m
    return n, d, edges


def read_graph_raw(path):
    doc, real = _load_json(path)
    return parse_graph_doc(doc, where=str(real))


def load_graph(path):
    n, d, edges = read_graph_raw(path)
    return MatrixGraph.from_edges(n, d, edges)


def graph_to_doc(g):
    return {
        "n_agents": g.n_agents,
        "dim": g.dim,
        "edges": [
            {"to": i, "from": j, "matrix": _plain(g.weights[(i, j)].matrix)}
            for i, j in g.edges
        ],
    }


def dump_graph(g, path):
    Path(path).write_text(json.dumps(graph_to_doc(g), indent=1) + "\n")


def _plain(m):
    """Nested lists with integral values written as ints, the rest as shortest-repr floats."""
    out = np.asarray(m, dtype=float).tolist()

    def conv(v):
        if isinstance(v, list):
            return [conv(x) for x in v]
        return int(v) if v.is_integer() and abs(v) < 2 ** 53 else v

    return conv(out)


def load_schedule(path, theta=None):
    """Build a :class:`TopologySchedule` from a schedule file.

    Designs are synthesized on load.  Each design names its graph and either
    a ``margin`` or an explicit ``delta``; an optional ``v1`` list fixes the
    decomposition, otherwise the smallest admissible one is searched for.
    """
    doc, real = _load_json(path)
    where = str(real)
    if theta is None:
        theta = _field(doc, "theta", where, list)
    mode = doc.get("mode", "cyclic")
    graphs = {}
    for gid, ref in _field(doc, "graphs", where, dict).items():
        gpath = ref if str(ref).startswith(BUNDLED_PREFIX) else real.parent / ref
        try:
            graphs[gid] = load_graph(gpath)
        except InvalidGraph as exc:
            raise ParseError(f"{where}.graphs.{gid}: {exc}") from exc
    designs, graph_of = {}, {}
    for did, spec in _field(doc, "designs", where, dict).items():
        loc = f"{where}.designs.{did}"
        gid = _field(spec, "graph", loc, str)
        if gid not in graphs:
            raise ParseError(f"{loc}.graph: unknown graph {gid!r}")
        g = graphs[gid]
        dec = Decomposition.from_v1(g, spec["v1"]) if "v1" in spec else find_decomposition(g)
        designs[did] = synthesize(g, dec, theta, margin=spec.get("margin", 0.1), delta=spec.get("delta"))
        graph_of[did] = gid
    segments = []
    for k, seg in enumerate(_field(doc, "segments", where, list)):
        loc = f"{where}.segments[{k}]"
        did = _field(seg, "design", loc, str)
        if did not in designs:
            raise ParseError(f"{loc}.design: unknown design {did!r}")
        duration = seg.get("duration")
        duration = math.inf if duration is None else float(duration)
        segments.append((graph_of[did], did, duration))
    return TopologySchedule(tuple(segments), mode, graphs, designs)


def design_to_doc(design, report=None):
    doc = {
        "n_agents": design.n_agents,
        "dim": design.dim,
        "theta": design.theta.tolist(),
        "C": design.C,
        "C_by_agent": {str(k): v for k, v in sorted(design.C_by_agent.items())},
        "delta": design.delta,
        "k1": design.k1,
        "x0": design.x0.tolist(),
        "informed_set": sorted(design.informed_set),
        "coupling": {str(i): B.tolist() for i, B in sorted(design.coupling.items())},
        "decomposition": design.decomposition.as_dict() if design.decomposition else None,
        "anchored": design.anchored,
        "notes": list(design.notes),
    }
    if report is not None:
        doc["certification"] = report.as_dict()
    return doc


def write_json(doc, path):
    Path(path).write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_trajectory_csv(traj, path, wide=False):
    """Full-precision trajectory CSV, long (``t,agent,dim,value``) or wide form."""
    N, d = traj.n_agents, traj.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if wide:
            w.writerow(["t"] + [f"x_{i}_{k}" for i in range(1, N + 1) for k in range(1, d + 1)])
            for t, row in zip(traj.times, traj.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        else:
            w.writerow(["t", "agent", "dim", "value"])
            for t, row in zip(traj.times, traj.states):
                tt = repr(float(t))
                for idx, v in enumerate(row):
                    w.writerow([tt, idx // d + 1, idx % d + 1, repr(float(v))])


def write_stats_csv(stats, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agent", "ms_error", "stderr"])
        for k, t in enumerate(stats.times):
            tt = repr(float(t))
            for i in range(stats.ms_error.shape[1]):
                w.writerow([tt, i + 1, repr(float(stats.ms_error[k, i])), repr(float(stats.stderr[k, i]))])


def read_stats_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = sorted({float(r["t"]) for r in rows})
    n = max(int(r["agent"]) for r in rows)
    ms = np.zeros((len(times), n))
    se = np.zeros_like(ms)
    pos = {t: k for k, t in enumerate(times)}
    for r in rows:
        k, i = pos[float(r["t"])], int(r["agent"]) - 1
        ms[k, i] = float(r["ms_error"])
        se[k, i] = float(r["stderr"])
    return np.array(times), ms, se


def write_manifest(outdir, command, inputs, options, seed, outputs):
    """Record what is needed to rerun a command alongside its outputs."""
    doc = {
        "command": command,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "options": options,
        "seed": seed,
        "outputs": [str(Path(o).name) for o in outputs],
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    path = Path(outdir) / "manifest.json"
    write_json(doc, path)
    return path

