"""Seeded batch experiments: configuration, trial dispatch, aggregation and output."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import analysis
from .baselines import run_gsf, run_rw, run_rwgp, run_sf
from .gtcore import DefectVector
from .protocol import BitMeter, ConfigError, ProtocolConfig, design_tests
from .topology import (ClusterAssignment, MasterMode, Topology, assign_clusters, build_complete,
                       build_k_regular, build_random_geometric)
from .trial import TrialResult, run_gossip_trial

CSV_COLUMNS = ["round", "detection_prob", "avg_rank", "bits_cumulative", "scheme", "S", "K",
               "L", "alpha", "p", "mode", "seed", "detection_prob_all"]


class Scheme(str, enum.Enum):
    GP = "GP"
    RWGP = "RWGP"
    RW = "RW"
    SF = "SF"
    GSF = "GSF"


def _coerce(enum_cls, value, norm):
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(norm(str(value)))
    except ValueError:
        raise ConfigError(f"unknown {enum_cls.__name__} {value!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: Scheme = Scheme.GP
    graph: str = "complete"  # complete | kregular:k | geometric:r
    S: int = 20
    K: int = 1
    L: int = 5
    alpha: float = 1.0
    p: float = 1.0
    mode: MasterMode = MasterMode.RM
    rounds: int = 30
    realizations: int = 10
    trials: int = 100
    seed: int = 0
    min_degree: int = 3
    walk_len: int | None = None
    delta: float | None = None
    L_n: int | None = None
    R_d: int = 7
    I_d: int = 7
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", _coerce(Scheme, self.scheme, str.upper))
        object.__setattr__(self, "mode", _coerce(MasterMode, self.mode, str.lower))
        self.validate()

    def validate(self) -> None:
        kind, _, arg = self.graph.partition(":")
        if kind not in ("complete", "kregular", "geometric"):
            raise ConfigError(f"unknown graph kind {kind!r}")
        if kind != "complete" and not arg:
            raise ConfigError(f"graph {kind!r} needs a parameter, e.g. {kind}:6")
        if self.S < 2:
            raise ConfigError("S must be at least 2")
        if not 1 <= self.L <= self.S:
            raise ConfigError("L must lie in [1, S]")
        if not 1 <= self.K < self.S:
            raise ConfigError("K must lie in [1, S)")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0 < self.p <= 1:
            raise ConfigError("p must lie in (0, 1]")
        if self.rounds < 0 or self.realizations < 1 or self.trials < 1:
            raise ConfigError("rounds must be >= 0, realizations and trials >= 1")
        if self.K >= 2:
            if self.scheme is not Scheme.GP:
                raise ConfigError("K >= 2 is only supported for the GP scheme")
            if self.mode is MasterMode.RM:
                raise ConfigError("K >= 2 needs fixed clusters: use mode=dm")
            if self.K > self.L:
                raise ConfigError("K >= 2 needs at least K clusters (one defective per cluster)")

    @property
    def q(self) -> float:
        return self.alpha / self.K

    def protocol(self) -> ProtocolConfig:
        return ProtocolConfig(L=self.L, K=self.K, alpha=self.alpha, p=self.p,
                              master_mode=self.mode, multi_mod=self.K >= 2,
                              rounds=self.rounds, delta=self.delta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        d["mode"] = self.mode.value
        return d

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:12]

    @classmethod
    def from_mapping(cls, m: dict) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, val in m.items():
            key = key.strip().replace("-", "_")
            if key == "trials_per_realization":
                key = "trials"
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(val, str):
                val = val.strip()
                t = types[key]
                if "None" in t and val.lower() in ("", "none"):
                    val = None
                elif t.startswith("int"):
                    val = int(val)
                elif t.startswith("float"):
                    val = float(val)
            kw[key] = val
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def parse_kv(text: str) -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path: str | Path) -> ExperimentConfig:
    return ExperimentConfig.from_mapping(parse_kv(Path(path).read_text()))


# ---------------------------------------------------------------------------
# randomness and instances

def topology_rng(seed: int, realization: int) -> np.random.Generator:
    return np.random.default_rng([seed, realization, 0])


def trial_rngs(seed: int, realization: int, trial: int) -> tuple[np.random.Generator, ...]:
    ss = np.random.SeedSequence([seed, realization, 1, trial])
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))


def build_topology(config: ExperimentConfig, rng: np.random.Generator) -> Topology:
    kind, _, arg = config.graph.partition(":")
    if kind == "complete":
        return build_complete(config.S)
    if kind == "kregular":
        return build_k_regular(config.S, int(arg), rng)
    return build_random_geometric(config.S, float(arg), config.min_degree, rng)


def draw_defects(S: int, K: int, clusters: ClusterAssignment | None,
                 rng: np.random.Generator) -> DefectVector:
    """K = 1: uniform sensor. K >= 2: one uniform sensor in each of K distinct clusters."""
    if K == 1:
        return DefectVector.from_sensors(S, [int(rng.integers(S))])
    picked = rng.choice(clusters.L, size=K, replace=False)
    sensors = [int(rng.choice(clusters.members(int(l)))) for l in picked]
    return DefectVector.from_sensors(S, sensors)


def run_trial(config: ExperimentConfig, topology: Topology, realization: int, trial: int,
              track_cluster_rank: bool = False) -> TrialResult:
    test_rng, pull_rng, defect_rng = trial_rngs(config.seed, realization, trial)
    pc = config.protocol()
    S = topology.S
    fixed = None
    if config.mode is MasterMode.DM or config.K >= 2:
        fixed = assign_clusters(topology, config.L, MasterMode.DM)
    f = draw_defects(S, config.K, fixed, defect_rng)

    if config.scheme is Scheme.GP:
        L_n = config.L_n if config.L_n is not None else max(S - config.L, 1)
        meter = BitMeter(S, config.L, L_n, config.q, config.R_d, config.I_d)

        def per_round() -> int:
            before = meter.total
            meter.on_design()
            meter.on_pull(S)
            return meter.total - before

        def source(t: int):
            cl = fixed if fixed is not None else assign_clusters(topology, config.L,
                                                                 MasterMode.RM, test_rng)
            return design_tests(cl, f, config.q, config.p, test_rng), config.L

        return run_gossip_trial("GP", topology, f, pc, source, pull_rng,
                                bits_per_round=per_round, decode_clusters=lambda: fixed,
                                track_cluster_rank=track_cluster_rank)
    if config.scheme is Scheme.RWGP:
        return run_rwgp(topology, f, config.L, config.rounds, test_rng,
                        walk_len=config.walk_len, p=config.p, delta=config.delta,
                        pull_rng=pull_rng, R_d=config.R_d, I_d=config.I_d)
    if config.scheme is Scheme.RW:
        return run_rw(topology, f, config.L, config.rounds, test_rng, config.R_d, config.I_d)
    if config.scheme is Scheme.SF:
        return run_sf(topology, f, config.rounds, test_rng, config.R_d, config.I_d)
    return run_gsf(topology, f, config.rounds, test_rng, config.R_d, config.I_d)


# ---------------------------------------------------------------------------
# aggregation

@dataclass
class Curves:
    config: ExperimentConfig
    detection_prob: np.ndarray
    detection_prob_all: np.ndarray
    avg_rank: np.ndarray
    bits_cumulative: np.ndarray
    false_detections: int = 0
    decode_events: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return len(self.detection_prob)

    def rounds_to(self, threshold: float = 0.9) -> int | None:
        hit = np.flatnonzero(self.detection_prob >= threshold)
        return int(hit[0]) + 1 if hit.size else None


@dataclass
class _Sums:
    detected: np.ndarray
    all_detected: np.ndarray
    rank: np.ndarray
    bits: np.ndarray
    false_detections: int = 0
    decode_events: int = 0
    n_trials: int = 0

    @classmethod
    def zeros(cls, R: int) -> "_Sums":
        z = lambda: np.zeros(R, dtype=np.int64)  # noqa: E731
        return cls(z(), z(), z(), z())

    def add(self, tr: TrialResult) -> None:
        self.detected += tr.detected.sum(axis=1)
        self.all_detected += tr.detected.all(axis=1)
        self.rank += tr.ranks.sum(axis=1)
        self.bits += tr.bits
        self.false_detections += tr.false_detections
        self.decode_events += tr.decode_events
        self.n_trials += 1

    def merge(self, o: "_Sums") -> None:
        for name in ("detected", "all_detected", "rank", "bits"):
            getattr(self, name).__iadd__(getattr(o, name))
        self.false_detections += o.false_detections
        self.decode_events += o.decode_events
        self.n_trials += o.n_trials


def _run_realization(args) -> _Sums:
    config, realization = args
    sums = _Sums.zeros(config.rounds)
    topo = build_topology(config, topology_rng(config.seed, realization))
    for trial in range(config.trials):
        sums.add(run_trial(config, topo, realization, trial))
    return sums


def metadata_for(config: ExperimentConfig) -> dict:
    return {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "log_base": {"required_messages": analysis.LOG_BASE_REQUIRED_MESSAGES,
                     "comm_sf": analysis.LOG_BASE_COMM_SF},
        "bits_rounding": analysis.ROUNDING,
        "detection": ("latched per (trial, sensor); detection_prob averages over sensors, "
                      "detection_prob_all is the fraction of trials where every sensor detected"),
        "raw_scheme_detection": "full coverage of all S readings (RW, SF, GSF)",
        "rank": "GF(2) rank of logged indicator rows, outcome bit excluded",
    }


def run_experiment(config: ExperimentConfig) -> Curves:
    R = config.rounds
    jobs = [(config, r) for r in range(config.realizations)]
    total = _Sums.zeros(R)
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_run_realization, jobs))
    else:
        parts = [_run_realization(j) for j in jobs]
    for part in parts:
        total.merge(part)
    n = max(total.n_trials, 1)
    S = config.S
    curves = Curves(config,
                    detection_prob=total.detected / (n * S),
                    detection_prob_all=total.all_detected / n,
                    avg_rank=total.rank / (n * S),
                    bits_cumulative=total.bits / n,
                    false_detections=total.false_detections,
                    decode_events=total.decode_events,
                    metadata=metadata_for(config))
    curves.metadata["false_detections"] = total.false_detections
    curves.metadata["decode_events"] = total.decode_events
    return curves


# ---------------------------------------------------------------------------
# output

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _rows(curves: Curves) -> list[list[str]]:
    c = curves.config
    out = []
    for r in range(curves.rounds):
        bits = curves.bits_cumulative[r]
        out.append([str(r + 1), _fmt(curves.detection_prob[r]), _fmt(curves.avg_rank[r]),
                    str(int(bits)) if float(bits).is_integer() else _fmt(bits),
                    c.scheme.value, str(c.S), str(c.K), str(c.L), repr(c.alpha), repr(c.p),
                    c.mode.value, str(c.seed), _fmt(curves.detection_prob_all[r])])
    return out


def to_csv(curves: Curves) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(_rows(curves))
    return buf.getvalue()


def to_json(curves: Curves) -> str:
    doc = {"metadata": curves.metadata, "columns": CSV_COLUMNS, "rows": _rows(curves)}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def emit_results(curves: Curves, fmt: str, path: str | Path) -> Path:
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    text = to_csv(curves) if fmt == "csv" else to_json(curves)
    path.write_text(text)
    return path


def load_results(path: str | Path) -> Curves:
    """Read back a JSON result file written by emit_results."""
    doc = json.loads(Path(path).read_text())
    cols = doc["columns"]
    rows = doc["rows"]
    col = {name: [r[i] for r in rows] for i, name in enumerate(cols)}
    config = ExperimentConfig.from_mapping(
        {k: ("" if v is None else str(v)) for k, v in doc["metadata"]["config"].items()})
    meta = doc["metadata"]
    return Curves(config,
                  detection_prob=np.array(col.get("detection_prob", []), dtype=float),
                  detection_prob_all=np.array(col.get("detection_prob_all", []), dtype=float),
                  avg_rank=np.array(col.get("avg_rank", []), dtype=float),
                  bits_cumulative=np.array(col.get("bits_cumulative", []), dtype=float),
                  false_detections=meta.get("false_detections", 0),
                  decode_events=meta.get("decode_events", 0),
                  metadata=meta)


NOT_REACHED = "not reached within budget"


def compare_schemes(configs: Sequence[ExperimentConfig], threshold: float = 0.9
                    ) -> list[dict]:
    """Rounds-to-threshold per scheme. Shared seeds give shared topologies."""
    seeds = {(c.seed, c.graph, c.S, c.realizations) for c in configs}
    if len(seeds) > 1:
        raise ConfigError("compared configs must share seed, graph, S and realizations")
    table = []
    for c in configs:
        curves = run_experiment(c)
        hit = curves.rounds_to(threshold)
        table.append({"scheme": c.scheme.value,
                      "rounds_to_threshold": hit if hit is not None else NOT_REACHED,
                      "threshold": threshold,
                      "final_detection_prob": float(curves.detection_prob[-1])
                      if curves.rounds else 0.0})
    return table


def format_table(table: Iterable[dict]) -> str:
    lines = ["scheme,rounds_to_threshold,threshold,final_detection_prob"]
    for row in table:
        lines.append(f"{row['scheme']},{row['rounds_to_threshold']},{row['threshold']},"
                     f"{row['final_detection_prob']:.6f}")
    return "\n".join(lines) + "\n"


def schemes_from_config(base: ExperimentConfig, schemes: Iterable[str]) -> list[ExperimentConfig]:
    return [replace(base, scheme=Scheme(s.strip().upper())) for s in schemes if s.strip()]
