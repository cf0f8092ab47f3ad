"""Experiment catalog, seeded trial orchestration and report emission."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import analysis, exor, sponge
from .adversaries import ADVERSARY_KINDS, DistinguisherSpec
from .errors import ConfigError, DomainError
from .oracle_core import LazyFunctionTable, hexfmt
from .rng import derive_seed, stream, trial_seed
from .stats import RateEstimate
from .subversion import SubverterSpec, crooked_fraction, detect, run_first_stage

OUTPUT_DIR_ENV = "CROOKLAB_OUTPUT_DIR"
FORMATS = ("jsonl", "csv")


# ------------------------------------------------------------------ config --
@dataclass
class ExperimentConfig:
    experiment: str
    construction: str = "exor"
    params: dict = field(default_factory=dict)
    subverter: SubverterSpec = field(default_factory=SubverterSpec)
    adversary: DistinguisherSpec = field(default_factory=DistinguisherSpec)
    worlds: list[str] = field(default_factory=list)
    trials: int = 100
    master_seed: int = 0
    q2: int | None = None
    output: str | None = None
    format: str = "jsonl"
    workers: int | None = None
    extra: dict = field(default_factory=dict)

    KEYS = ("experiment", "construction", "params", "subverter", "adversary", "worlds",
            "trials", "master_seed", "q2", "output", "format", "workers", "extra")

    def __post_init__(self):
        if self.experiment not in CATALOG:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.construction not in ("exor", "sponge"):
            raise ConfigError(f"unknown construction {self.construction!r}")
        if not isinstance(self.trials, int) or self.trials < 0:
            raise ConfigError("trials must be a non-negative integer")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 1 << 64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.q2 is not None and self.q2 < 1:
            raise ConfigError("q2 must be positive")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be positive")
        valid = exor.WORLDS if self.construction == "exor" else sponge.WORLDS
        for w in self.worlds:
            if w not in valid:
                raise ConfigError(f"world {w!r} not defined for {self.construction}")
        need = CATALOG[self.experiment].required or \
            {"exor": ("n", "l"), "sponge": ("r", "c", "ell", "s")}[self.construction]
        missing = [k for k in need if k not in self.params]
        if missing and CATALOG[self.experiment].needs_params:
            raise ConfigError(f"params missing {missing}")

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        try:
            if "subverter" in d:
                d["subverter"] = SubverterSpec.from_dict(d["subverter"])
            if "adversary" in d:
                d["adversary"] = DistinguisherSpec.from_dict(d["adversary"])
        except (DomainError, TypeError) as e:
            raise ConfigError(str(e)) from e
        if "experiment" not in d:
            raise ConfigError("config needs an 'experiment' key")
        return cls(**d)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "construction": self.construction,
                "params": self.params, "subverter": self.subverter.to_dict(),
                "adversary": self.adversary.to_dict(), "worlds": self.worlds,
                "trials": self.trials, "master_seed": self.master_seed, "q2": self.q2,
                "format": self.format, "extra": self.extra}

    # convenience ----------------------------------------------------------
    def exor_q2(self) -> int:
        return self.q2 if self.q2 is not None else self.adversary.exor_budget()

    def sponge_params(self) -> sponge.SpongeParams:
        p = self.params
        return sponge.SpongeParams(p["r"], p["c"], p["ell"], p["s"])


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Read a YAML/JSON config. I/O problems raise OSError, content ConfigError."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config: {e}") from e
    return ExperimentConfig.from_dict(data)


# ------------------------------------------------------------------ report --
@dataclass
class Report:
    experiment: str
    columns: list[str]
    rows: list[dict]
    summary: dict
    passed: bool

    def summary_row(self) -> dict:
        return {"row_type": "summary", "experiment": self.experiment,
                "pass": int(self.passed), **self.summary}


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(v, sort_keys=True)
    return v


def render_report(report: Report, fmt: str = "jsonl") -> str:
    trial_cols = ["row_type", *report.columns]
    summary = report.summary_row()
    if fmt == "jsonl":
        lines = []
        for r in report.rows:
            lines.append(json.dumps({"row_type": "trial",
                                     **{c: _jsonable(r.get(c)) for c in report.columns}}))
        lines.append(json.dumps({k: _jsonable(v) for k, v in summary.items()}))
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        cols = trial_cols + [k for k in summary if k not in trial_cols]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in report.rows:
            row = {"row_type": "trial", **r}
            w.writerow(["" if row.get(c) is None else _cell(row.get(c)) for c in cols])
        w.writerow(["" if summary.get(c) is None else _cell(summary.get(c)) for c in cols])
        return buf.getvalue()
    raise ConfigError(f"unknown report format {fmt!r}")


def _jsonable(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def output_path(config: ExperimentConfig, override: str | None = None) -> Path:
    name = override or config.output or f"{config.experiment}.{config.format}"
    p = Path(name)
    if not p.is_absolute():
        p = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / p
    return p


def emit_report(report: Report, path: str | os.PathLike, fmt: str = "jsonl") -> Path:
    """Write the report. Stable column order; reruns are byte-identical."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(render_report(report, fmt))
    return p


# --------------------------------------------------------- trial machinery --
def _rate_fields(prefix: str, est: RateEstimate) -> dict:
    return {f"{prefix}": est.estimate, f"{prefix}_ci_low": est.ci_low,
            f"{prefix}_ci_high": est.ci_high}


def _exor_setup(cfg: ExperimentConfig, s: int, spec: SubverterSpec | None = None):
    n, l = cfg.params["n"], cfg.params["l"]
    spec = cfg.subverter if spec is None else spec
    H = LazyFunctionTable(n, s, "h", max_index=l)
    handle, _ = run_first_stage(spec, H.peek, l=l, n=n, rng=stream(s, "stage-one"))
    params = exor.ExorParams.sample(n, l, stream(s, "iv"))
    return H, handle, params


def _exor_result(cfg, world, adv, handle, params, s, q2):
    return exor.run_exor_game(world, adv, handle, params, s, q2=q2,
                              adv_rng=stream(s, "adversary"))


def _sponge_result(cfg, world, adv, s, q2=None, qh=None):
    sp = cfg.sponge_params()
    if q2 is None:
        q2, qh_need = adv.sponge_budget(sp.calls_per_message)
        q2 = cfg.q2 if cfg.q2 is not None else q2
        qh = qh_need if qh is None else qh
    return sponge.run_sponge_game(world, adv, cfg.subverter, sp, s, q2=q2,
                                  qh=qh, adv_rng=stream(s, "adversary"))


def _trial_exor_bad(cfg: ExperimentConfig, i: int) -> dict:
    s = trial_seed(cfg.master_seed, i)
    _, handle, params = _exor_setup(cfg, s)
    world = cfg.worlds[0] if cfg.worlds else "Ideal"
    res = _exor_result(cfg, world, cfg.adversary, handle, params, s, cfg.exor_q2())
    return {"trial": i, "seed": hexfmt(s, 64), "world": world, "output": res.output_bit,
            "bad1": res.bad1, "bad2": res.bad2, "bad": res.bad, "aborted": res.aborted,
            "unflagged_consistent": res.unflagged_consistent(),
            "ledger_rows": len(res.ledger), "f_queries": res.f_queries,
            "htilde_calls": res.htilde_calls}


def _trial_sponge_bad(cfg: ExperimentConfig, i: int) -> dict:
    s = trial_seed(cfg.master_seed, i)
    world = cfg.worlds[0] if cfg.worlds else "G1a"
    res = _sponge_result(cfg, world, cfg.adversary, s)
    return {"trial": i, "seed": hexfmt(s, 64), "world": world, "output": res.output_bit,
            "bad": res.bad, "unflagged_consistent": res.unflagged_consistent(),
            "ledger_rows": len(res.ledger), "f_queries": res.f_queries,
            "htilde_calls": res.htilde_calls}


def _trial_detection(cfg: ExperimentConfig, i: int) -> dict:
    s = trial_seed(cfg.master_seed, i)
    n = cfg.params["n"]
    l = cfg.params.get("l", 0)
    H = LazyFunctionTable(n, s, "h", max_index=l)
    handle, _ = run_first_stage(cfg.subverter, H.peek, l=l, n=n, rng=stream(s, "stage-one"))
    row = {"trial": i, "seed": hexfmt(s, 64)}
    for t in cfg.extra.get("t_values", [1, 10, 100]):
        row[f"pass_t{t}"] = detect(handle, H, t, stream(s, "detect", t))
    return row


def _trial_multi_message(cfg: ExperimentConfig, i: int) -> dict:
    s = trial_seed(cfg.master_seed, i)
    _, handle, params = _exor_setup(cfg, s)
    adv = DistinguisherSpec("consistency-multi", count=2)
    res = _exor_result(cfg, "Ideal", adv, handle, params, s, adv.exor_budget())
    second = res.batches[-1] if len(res.batches) >= 2 else None
    # the pair is (m xor 1^n, m); locate m's batch by message
    ms = [a[1] for a in res.answers if a[0] == "batch"]
    rec = next((b for b in res.batches if b.m == ms[-1]), second)
    return {"trial": i, "seed": hexfmt(s, 64), "first": hexfmt(ms[0], params.n),
            "second": hexfmt(ms[-1], params.n), "prefixed": bool(rec and rec.prefixed),
            "bad": res.bad}


def _trial_f_collision(cfg: ExperimentConfig, i: int) -> dict:
    s = trial_seed(cfg.master_seed, i)
    _, handle, params = _exor_setup(cfg, s)
    world = cfg.worlds[0] if cfg.worlds else "Ideal"
    row = {"trial": i, "seed": hexfmt(s, 64)}
    for qF in _qf_values(cfg):
        adv = DistinguisherSpec("f-collision", qF=qF)
        res = _exor_result(cfg, world, adv, handle, params, derive_seed(s, "qF", qF), qF)
        row[f"bad1_q{qF}"] = res.bad1
        row[f"collision_q{qF}"] = res.output_bit
    return row


def _qf_values(cfg: ExperimentConfig) -> list[int]:
    vals = cfg.extra.get("qF_values")
    if vals is None:
        n = cfg.params["n"]
        vals = [2, 1 << (n // 2), 1 << (n // 2 + 1)]
    return list(vals)


def _game_chain_exor(cfg: ExperimentConfig, s: int, adv: DistinguisherSpec) -> dict:
    _, handle, params = _exor_setup(cfg, s)
    q2 = adv.exor_budget()
    r = {w: _exor_result(cfg, w, adv, handle, params, s, q2) for w in exor.WORLDS}

    def same(a, b):
        return r[a].output_bit == r[b].output_bit and r[a].answers == r[b].answers
    return {"real_g0": same("Real", "G0"), "g0_g1": same("G0", "G1"),
            "g2_ideal": same("G2", "Ideal"),
            "g1_g2_or_bad": same("G1", "G2") or r["G1"].bad,
            "bad": r["G1"].bad}


def _game_chain_sponge(cfg: ExperimentConfig, s: int, adv: DistinguisherSpec) -> dict:
    r = {w: _sponge_result(cfg, w, adv, s) for w in ("Real", "G0", "G1a", "G1b", "G2")}

    def same(a, b):
        return r[a].output_bit == r[b].output_bit and r[a].answers == r[b].answers
    return {"real_g0": same("Real", "G0"), "g0_g1a": same("G0", "G1a"),
            "g1b_g2": same("G1b", "G2"),
            "g1a_g1b_or_bad": same("G1a", "G1b") or r["G1a"].bad,
            "bad": r["G1a"].bad}


def _audit_adversaries(cfg: ExperimentConfig) -> list[DistinguisherSpec]:
    kinds = cfg.extra.get("adversaries")
    if kinds is None:
        return [cfg.adversary]
    if kinds == "all":
        kinds = [{"kind": k} for k in ADVERSARY_KINDS]
    return [DistinguisherSpec.from_dict(k if isinstance(k, dict) else {"kind": k})
            for k in kinds]


def _trial_game_chain(cfg: ExperimentConfig, i: int) -> dict:
    s = trial_seed(cfg.master_seed, i)
    row: dict = {"trial": i, "seed": hexfmt(s, 64)}
    ok = True
    for adv in _audit_adversaries(cfg):
        f = _game_chain_exor if cfg.construction == "exor" else _game_chain_sponge
        eq = f(cfg, derive_seed(s, adv.kind), adv)
        for k, v in eq.items():
            row[f"{adv.kind}:{k}"] = v
        ok &= all(v for k, v in eq.items() if k != "bad")
    row["all_equal"] = ok
    return row


# ----------------------------------------------------- summaries per kind --
def _summarize_exor_bad(cfg, rows) -> tuple[dict, bool]:
    n = cfg.params["n"]
    bad = RateEstimate(sum(r["bad"] for r in rows), len(rows))
    eps_nominal = cfg.subverter.nominal_eps()
    eps_meas = 0.0
    for i in range(min(len(rows), cfg.extra.get("eps_tables", 8))):
        H, handle, _ = _exor_setup(cfg, trial_seed(cfg.master_seed, i))
        if n <= analysis.DJ_EXACT_MAX_BITS:
            eps_meas = max(eps_meas, max(x.estimate for x in crooked_fraction(handle, H)))
    eps = max(eps_nominal, eps_meas)
    q2 = cfg.exor_q2()
    b = analysis.exor_bound(eps=eps, q1=cfg.subverter.q1, q2=q2,
                            tau=cfg.subverter.query_bound, n=n)
    ok = b.vacuous or bad.ci_high <= b.value
    consistent = all(r["unflagged_consistent"] for r in rows)
    return ({**_rate_fields("bad_rate", bad), "trials": len(rows), "eps_nominal": eps_nominal,
             "eps_measured": eps_meas, "paper_bound": b.value, "vacuous": b.vacuous,
             "budget_inflation_factor": cfg.params["l"], "unflagged_consistent": consistent,
             "f_queries_mean": _mean([r["f_queries"] for r in rows]),
             "htilde_calls_mean": _mean([r["htilde_calls"] for r in rows])},
            ok and consistent)


def _mean(xs):
    return sum(xs) / len(xs) if xs else 0.0


def measured_sponge_eps(cfg: ExperimentConfig, tables: int) -> float:
    sp = cfg.sponge_params()
    eps = 0.0
    for i in range(tables):
        s = trial_seed(cfg.master_seed, i)
        H = LazyFunctionTable(sp.n, s, "h")
        handle, _ = run_first_stage(cfg.subverter, H.peek, l=0, n=sp.n,
                                    rng=stream(s, "stage-one"))
        eps = max(eps, crooked_fraction(handle, H, max_bits=sp.n)[0].estimate)
    return eps


def _summarize_sponge_bad(cfg, rows) -> tuple[dict, bool]:
    sp = cfg.sponge_params()
    bad = RateEstimate(sum(r["bad"] for r in rows), len(rows))
    eps = measured_sponge_eps(cfg, min(len(rows), cfg.extra.get("eps_tables", 4)))
    eps = max(eps, cfg.extra.get("eps_floor", 0.0))
    q2 = cfg.q2 if cfg.q2 is not None else cfg.adversary.sponge_budget(sp.calls_per_message)[0]
    readings = analysis.sponge_ell_s(sp.ell, sp.s, sp.r)
    kappa = cfg.subverter.q1
    out = {**_rate_fields("bad_rate", bad), "trials": len(rows), "eps_measured": eps,
           "kappa": kappa, "q2": q2}
    for name, ls in readings.items():
        b = analysis.sponge_bad_bound(q2=q2, ell_s=ls, eps=eps, r=sp.r, kappa=kappa, c=sp.c)
        out[f"sponge_bad_bound_{name}"] = b.value
        out[f"vacuous_{name}"] = b.vacuous
    primary = analysis.sponge_bad_bound(q2=q2, ell_s=readings["blocks"], eps=eps, r=sp.r,
                                    kappa=kappa, c=sp.c)
    out["paper_bound"] = primary.value
    out["vacuous"] = primary.vacuous
    return out, primary.vacuous or bad.ci_high <= primary.value


def _summarize_detection(cfg, rows) -> tuple[dict, bool]:
    eps = cfg.extra.get("eps", cfg.subverter.nominal_eps())
    out = {"trials": len(rows), "eps": eps}
    ok = True
    for t in cfg.extra.get("t_values", [1, 10, 100]):
        est = RateEstimate(sum(r[f"pass_t{t}"] for r in rows), len(rows))
        target = (1 - eps) ** t
        out.update(_rate_fields(f"pass_rate_t{t}", est))
        out[f"target_t{t}"] = target
        ok &= est.contains(target)
    return out, ok


def _summarize_multi(cfg, rows) -> tuple[dict, bool]:
    est = RateEstimate(sum(r["prefixed"] for r in rows), len(rows))
    return {**_rate_fields("assertion_rate", est), "trials": len(rows)}, \
        est.successes == est.trials


def _summarize_f_collision(cfg, rows) -> tuple[dict, bool]:
    out: dict = {"trials": len(rows)}
    rates = []
    for qF in _qf_values(cfg):
        est = RateEstimate(sum(r[f"bad1_q{qF}"] for r in rows), len(rows))
        out.update(_rate_fields(f"bad1_rate_q{qF}", est))
        rates.append(est.estimate)
    mono = all(a <= b for a, b in zip(rates, rates[1:]))
    out["monotone"] = mono
    return out, mono


def _summarize_game_chain(cfg, rows) -> tuple[dict, bool]:
    ok = sum(r["all_equal"] for r in rows)
    return {"trials": len(rows), "all_equal_rows": ok}, ok == len(rows)


# ---------------------------------------------------- analysis experiments --
def _analysis_rows(cfg: ExperimentConfig) -> tuple[list[dict], dict, bool]:
    e = cfg.experiment
    n = cfg.params.get("n", 6)
    l = cfg.params.get("l", 2)
    x = cfg.extra
    if e == "lemma1-check":
        rows = analysis.check_lemma1(cfg.subverter, n=n, l=l, tables=cfg.trials,
                                     alphas=x.get("alphas", 8), seed=cfg.master_seed,
                                     slack=x.get("slack", 0.02))
    elif e == "robust-function-check":
        rows = [analysis.check_robust_function(cfg.subverter, n=n, l=l, tables=cfg.trials,
                                               seed=cfg.master_seed)]
    elif e == "critical-set-check":
        mode = x.get("mode", "all-m")
        if isinstance(mode, list):
            mode = tuple(mode)
        rows = [analysis.check_critical_set(cfg.subverter, n=n, l=l, samples=cfg.trials,
                                            seed=cfg.master_seed, mode=mode)]
    elif e == "resampling-set-check":
        row, _ = analysis.check_resampling_samples(cfg.subverter, n=n, l=l,
                                                   samples=cfg.trials, seed=cfg.master_seed)
        rows = [row]
    elif e == "rejection-resampling-check":
        return _rejection_rows(cfg)
    else:  # pragma: no cover - guarded by the catalog
        raise ConfigError(e)
    out = [{"trial": k, **_flatten(r.as_dict())} for k, r in enumerate(rows)]
    passed = all(r.passed for r in rows)
    return out, {"checks": len(rows), "passed_checks": sum(r.passed for r in rows)}, passed


def _flatten(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out[k] = json.dumps(v, sort_keys=True)
        else:
            out[k] = v
    return out


def rejection_resampling_suite(sizes: list[int], selectors: int, random_sets: int,
                               seed: int) -> list[dict]:
    omega = list(itertools.product(*(range(s) for s in sizes)))
    rows = []
    for a in range(selectors):
        rng = stream(seed, "selector", tuple(sizes), a)
        sel = analysis.random_selector(sizes, rng)
        rs = analysis.RejectionResampler(sizes, sel)
        sets = [[w] for w in omega]
        for _ in range(random_sets):
            size = rng.randint(1, len(omega))
            sets.append(rng.sample(omega, size))
        sets.append(omega)
        results = [rs.check(S) for S in sets]
        worst = max(r.ratio for r in results)
        rows.append({"sizes": list(sizes), "selector": a, "sets": len(sets),
                     "violations": sum(not r.holds for r in results),
                     "worst_ratio": worst})
    return rows


def _rejection_rows(cfg: ExperimentConfig):
    x = cfg.extra
    shapes = x.get("shapes", [[4, 4], [2, 3, 4], [4, 4, 4]])
    rows = []
    for shape in shapes:
        rows.extend(rejection_resampling_suite(list(shape), x.get("selectors", 100),
                                               x.get("random_sets", 200), cfg.master_seed))
    for k, r in enumerate(rows):
        r["trial"] = k
    viol = sum(r["violations"] for r in rows)
    return rows, {"selectors": len(rows), "violations": viol,
                  "worst_ratio": max((r["worst_ratio"] for r in rows), default=0.0)}, viol == 0


# ---------------------------------------------------------------- catalog --
@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    trial: Callable | None = None
    summarize: Callable | None = None
    needs_params: bool = True
    required: tuple[str, ...] | None = None


CATALOG: dict[str, Experiment] = {e.name: e for e in [
    Experiment("exor-bad-prob", "EXor Pr[Bad1 or Bad2] against the EXor theorem bound",
               _trial_exor_bad, _summarize_exor_bad),
    Experiment("sponge-bad-prob", "sponge Pr[Bad] against the sponge Bad bound",
               _trial_sponge_bad, _summarize_sponge_bad),
    Experiment("lemma1-check", "Ex[D^j] against eps + q1 2^-n", needs_params=False),
    Experiment("robust-function-check", "Pr[h not robust] against eps2^(1/2)",
               needs_params=False),
    Experiment("critical-set-check", "Pr[(R,h) outside the critical set] against p1",
               needs_params=False),
    Experiment("resampling-set-check", "resampling identities on the set S",
               needs_params=False),
    Experiment("rejection-resampling-check", "exact rejection-resampling inequality",
               needs_params=False),
    Experiment("detection-curve", "detector pass rate against (1 - eps)^t",
               _trial_detection, _summarize_detection, required=("n",)),
    Experiment("multi-message-attack", "neighbour queries pre-fix the second batch",
               _trial_multi_message, _summarize_multi),
    Experiment("f-collision-demo", "Pr[Bad1] as the F-query count grows",
               _trial_f_collision, _summarize_f_collision),
    Experiment("game-chain-audit", "per-seed equality of adjacent games",
               _trial_game_chain, _summarize_game_chain),
]}


def _run_chunk(cfg_dict: dict, indices: list[int]) -> list[dict]:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    trial = CATALOG[cfg.experiment].trial
    return [trial(cfg, i) for i in indices]


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def run_trials(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Run cfg.trials trials, in parallel if workers > 1; sorted by index."""
    trial = CATALOG[cfg.experiment].trial
    workers = cfg.workers if workers is None else workers
    if workers is None:
        workers = os.cpu_count() or 1
    idx = list(range(cfg.trials))
    if workers <= 1 or len(idx) < 2:
        return [trial(cfg, i) for i in idx]
    raw = cfg.to_dict()
    raw["subverter"] = cfg.subverter.to_dict()
    chunks = [idx[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [raw] * len(chunks), chunks))
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: r["trial"])
    return rows


def run_experiment(cfg: ExperimentConfig, *, workers: int | None = None) -> Report:
    exp = CATALOG[cfg.experiment]
    if exp.trial is None:
        rows, summary, passed = _analysis_rows(cfg)
    else:
        if cfg.experiment in ("exor-bad-prob", "game-chain-audit", "sponge-bad-prob"):
            _check_budget(cfg)
        rows = run_trials(cfg, workers)
        summary, passed = exp.summarize(cfg, rows)
    cols = _columns(rows) or ["trial"]
    return Report(cfg.experiment, cols, rows, summary, bool(passed))


def _check_budget(cfg: ExperimentConfig) -> None:
    if cfg.q2 is None:
        return
    if cfg.construction == "exor":
        need = cfg.adversary.exor_budget()
    else:
        need = cfg.adversary.sponge_budget(cfg.sponge_params().calls_per_message)[0]
    if need > cfg.q2:
        raise ConfigError(f"adversary needs {need} queries but q2={cfg.q2}")


# -------------------------------------------------------------- advantage --
ADJACENT = {
    "exor": {("Real", "G0"), ("G0", "G1"), ("G1", "G2"), ("G2", "Ideal")},
    "sponge": {("Real", "G0"), ("G0", "G1a"), ("G1a", "G1b"), ("G1b", "G2"),
               ("G2", "G3"), ("G3", "Ideal")},
}


@dataclass
class AdvantageEstimate:
    world_a: str
    world_b: str
    p_world_a: RateEstimate
    p_world_b: RateEstimate
    bad_rate: RateEstimate
    trials: int
    paired: bool

    @property
    def advantage(self) -> float:
        return abs(self.p_world_a.estimate - self.p_world_b.estimate)

    @property
    def wilson_95(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return self.p_world_a.ci, self.p_world_b.ci

    def as_dict(self) -> dict:
        return {"world_a": self.world_a, "world_b": self.world_b,
                "p_world_a": self.p_world_a.estimate, "p_world_b": self.p_world_b.estimate,
                "advantage": self.advantage, "ci_a": list(self.p_world_a.ci),
                "ci_b": list(self.p_world_b.ci), "bad_rate": self.bad_rate.estimate,
                "bad_ci": list(self.bad_rate.ci), "trials": self.trials,
                "paired": self.paired}


def _paired(construction: str, a: str, b: str) -> bool:
    if a == b:
        return True
    pairs = ADJACENT[construction]
    order = exor.WORLDS if construction == "exor" else sponge.WORLDS
    ia, ib = sorted((order.index(a), order.index(b)))
    # a chain of adjacent pairs is still coupled by the shared tapes
    return all((order[k], order[k + 1]) in pairs for k in range(ia, ib))


def estimate_advantage(world_a: str, world_b: str, adversary: DistinguisherSpec,
                       cfg: ExperimentConfig, trials: int, seed: int) -> AdvantageEstimate:
    """Acceptance frequencies of two worlds with per-seed pairing when coupled."""
    paired = _paired(cfg.construction, world_a, world_b) and cfg.extra.get("pair", True)
    hits_a = hits_b = bad = 0
    for i in range(trials):
        sa = trial_seed(seed, i)
        sb = sa if paired else derive_seed(seed, "independent", i)
        if cfg.construction == "exor":
            q2 = cfg.q2 if cfg.q2 is not None else adversary.exor_budget()
            _, ha, pa = _exor_setup(cfg, sa)
            ra = _exor_result(cfg, world_a, adversary, ha, pa, sa, q2)
            _, hb, pb = _exor_setup(cfg, sb)
            rb = _exor_result(cfg, world_b, adversary, hb, pb, sb, q2)
            bad += ra.bad or rb.bad
        else:
            ra = _sponge_result(cfg, world_a, adversary, sa)
            rb = _sponge_result(cfg, world_b, adversary, sb)
            bad += ra.bad or rb.bad
        hits_a += ra.output_bit
        hits_b += rb.output_bit
    return AdvantageEstimate(world_a, world_b, RateEstimate(hits_a, trials),
                             RateEstimate(hits_b, trials), RateEstimate(bad, trials),
                             trials, paired)


__all__ = ["ExperimentConfig", "Report", "CATALOG", "load_config", "run_experiment",
           "run_trials", "emit_report", "render_report", "estimate_advantage",
           "AdvantageEstimate", "output_path", "OUTPUT_DIR_ENV", "rejection_resampling_suite",
           "measured_sponge_eps"]
