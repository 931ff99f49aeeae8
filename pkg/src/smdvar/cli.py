"""Command line front end: ``smdvar {run-smd, estimate-variance, gaussian-map, verify}``.

Exit codes: 0 success, 1 configuration error, 2 runtime abort (a partial
output may have been written), 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import gaussian as gs
from . import verify as vf
from .errors import ConfigError, DualRangeError, SMDError
from .gaussian import GaussParams
from .registry import REGISTRY, build
from .smd import ProxSpec, RunConfig, StepSchedule, replica_seed, run
from .svg import loglog_svg
from .variance import FEtaEstimator, report_csv, variance_report

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_VERIFY = 0, 1, 2, 3
U64 = 2**64


def schema() -> dict:
    return json.loads(resources.files("smdvar").joinpath("config_schema.json").read_text())


def _line_of(text: str, key: str) -> Optional[int]:
    pat = re.compile(rf"^\s*(\[+\s*)?[\"']?{re.escape(key)}[\"']?\s*(=|\]|\.)")
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.search(line):
            return i
    return None


def parse_config(text: str) -> dict:
    """Parse TOML text and validate it against the shipped schema."""
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        m = re.search(r"line (\d+)", str(err))
        raise ConfigError(f"invalid TOML: {err}", line=int(m.group(1)) if m else None) from None
    validator = jsonschema.Draft202012Validator(schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(cfg))
    if err is not None:
        path = [str(p) for p in err.absolute_path]
        key = path[-1] if path else None
        if err.validator == "additionalProperties":
            m = re.search(r"'([^']+)' was unexpected", err.message)
            if m:
                key = m.group(1)
                path.append(key)
        field = ".".join(path) or None
        line = _line_of(text, key) if key and not key.isdigit() else None
        raise ConfigError(err.message, field=field, line=line)
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    return parse_config(text)


def _require(cfg: dict, table: str) -> dict:
    if table not in cfg:
        raise ConfigError(f"missing [{table}] table", field=table)
    return cfg[table]


def _build_pair(cfg: dict):
    problem = _require(cfg, "problem")
    try:
        return build(problem["pair"], problem)
    except (ValueError, IndexError) as err:
        raise ConfigError(f"problem: {err}", field="problem") from None


def _schedule(r: dict) -> StepSchedule:
    kind = r.get("schedule", "constant")
    need = {"constant": "eta", "map": "n0", "halving": "k0"}[kind]
    if need not in r:
        raise ConfigError(f"run.schedule={kind!r} requires run.{need}", field=f"run.{need}")
    if kind == "constant":
        return StepSchedule.constant(r["eta"])
    if kind == "map":
        return StepSchedule.map(r["n0"])
    return StepSchedule.halving(r["k0"])


def _prox(r: dict, pair) -> Optional[ProxSpec]:
    spec = r.get("prox")
    if spec is None:
        return ProxSpec.simplex() if pair.prox == "simplex" else None
    if spec["kind"] == "box":
        p = ProxSpec.box(spec.get("lower", -np.inf), spec.get("upper", np.inf))
    elif spec["kind"] == "l1":
        p = ProxSpec.l1(spec.get("lam", 0.0))
    else:
        p = ProxSpec.simplex()
    if (pair.mirror.name, p.kind) not in ProxSpec.SUPPORTED:
        raise ConfigError(f"prox {p.kind!r} is not available with mirror {pair.mirror.name!r}", field="run.prox.kind")
    return p


def _x0(r: dict, pair) -> np.ndarray:
    if "x0" in r and "x0_moments" in r:
        raise ConfigError("give only one of run.x0 and run.x0_moments", field="run.x0")
    if "x0_moments" in r:
        if pair.mirror.name != "gaussian_log_partition":
            raise ConfigError("run.x0_moments applies to the Gaussian pair only", field="run.x0_moments")
        try:
            return GaussParams(*r["x0_moments"]).theta
        except SMDError as err:
            raise ConfigError(f"run.x0_moments: {err}", field="run.x0_moments") from None
    if "x0" in r:
        x0 = np.asarray(r["x0"], dtype=float)
        if x0.shape != (pair.mirror.dim,) or not pair.mirror.in_domain(x0, pair.mirror.eps_dom):
            raise ConfigError(f"run.x0 must be an interior point of dimension {pair.mirror.dim}", field="run.x0")
        return x0
    return pair.x0


# ---------------------------------------------------------------------------
# subcommands


def cmd_run_smd(cfg: dict, out: Path, seed: Optional[int], replicas: Optional[int]) -> int:
    pair = _build_pair(cfg)
    r = _require(cfg, "run")
    try:
        base = RunConfig(pair.mirror, pair.objective, _schedule(r), r["horizon"],
                         seed if seed is not None else r.get("seed", 0), _x0(r, pair), r.get("record_every", 1),
                         _prox(r, pair))
    except ConfigError:
        raise
    except (ValueError, SMDError) as err:
        raise ConfigError(f"run: {err}", field="run") from None
    n = replicas or 1
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for i in range(n):
        cfg_i = base if n == 1 else RunConfig(base.mirror, base.objective, base.schedule, base.horizon,
                                              replica_seed(base.seed, i), base.x0, base.record_every, base.prox)
        trace = run(cfg_i)
        path = out / ("trace.csv" if n == 1 else f"trace_{i:04d}.csv")
        path.write_text(trace.to_csv())
        if trace.aborted:
            print(f"run aborted ({path}): {trace.error}", file=sys.stderr)
            status = EXIT_ABORT
    return status


def cmd_estimate_variance(cfg: dict, out: Path, seed: Optional[int]) -> int:
    pair = _build_pair(cfg)
    v = _require(cfg, "variance")
    mode = v.get("mode", "auto")
    kw = {k: v[k] for k in ("n_samples", "n_nodes") if k in v}
    kw["seed"] = seed if seed is not None else v.get("seed", 0)
    grid = [np.asarray(g, dtype=float) for g in v.get("grid", [])]
    reports = []
    try:
        for eta in v["etas"]:
            est = (FEtaEstimator.auto(pair.objective, eta, **kw) if mode == "auto"
                   else FEtaEstimator(mode, eta, **kw))
            rep = variance_report(pair.mirror, pair.objective, eta, est, grid, tol=v.get("tol", 1e-7),
                                  max_evals=v.get("max_evals", 100_000))
            for name, why in rep.unavailable.items():
                print(f"eta={eta}: {name} unavailable ({why})", file=sys.stderr)
            reports.append(rep)
    except ValueError as err:
        raise ConfigError(f"variance: {err}", field="variance") from None
    except SMDError as err:
        out.mkdir(parents=True, exist_ok=True)
        (out / "variance.csv").write_text(report_csv(reports))
        print(f"variance estimation aborted: {err}", file=sys.stderr)
        return EXIT_ABORT
    out.mkdir(parents=True, exist_ok=True)
    (out / "variance.csv").write_text(report_csv(reports))
    return EXIT_OK


def _csv_value(v) -> str:
    return "" if v is None else repr(v)


def experiment_csv(rows) -> str:
    lines = [",".join(gs.EXPERIMENT_HEADER)]
    lines.extend(",".join(_csv_value(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def cmd_gaussian_map(cfg: dict, out: Path, seed: Optional[int], replicas: Optional[int]) -> int:
    g = cfg.get("gaussian", {})
    mode = g.get("mode", "map")
    seed = seed if seed is not None else g.get("seed", 0)
    truth = (g.get("m_star", 0.0), g.get("var_star", 1.0))
    out.mkdir(parents=True, exist_ok=True)
    if mode == "mle-two-step":
        draws = g.get("draws", 10**6)
        est = gs.mle_two_step_constant_mc(draws, seed, *truth)
        (out / "experiment.csv").write_text(experiment_csv([(2, 0, draws, est.mean, est.stderr, None, None)]))
        print(f"E D_A(theta_*, theta^2) = {est.mean:.6f} +- {est.stderr:.2g}"
              f" (digamma oracle {gs.MLE_TWO_STEP_CONSTANT:.6f})")
        return EXIT_OK
    reps = replicas or g.get("replicas", 100)
    n = g.get("n", 2000)
    try:
        if mode == "map":
            n0 = g.get("n0", 4)
            curve = gs.map_experiment(n0, n, reps, seed, g.get("prior_mu", (truth[0], truth[0] ** 2 + truth[1])),
                                      *truth)
        else:
            n0 = g.get("n0", 6)
            start = GaussParams(*g.get("start_moments", truth))
            curve = gs.modified_experiment(n0, n, reps, seed, start, *truth)
    except (ValueError, SMDError) as err:
        raise ConfigError(f"gaussian: {err}", field="gaussian") from None
    rows = gs.experiment_rows(curve, n0, mode)
    every = g.get("record_every", 1)
    rows = [row for i, row in enumerate(rows) if i % every == 0 or i == len(rows) - 1]
    (out / "experiment.csv").write_text(experiment_csv(rows))
    if g.get("svg", True):
        ns = np.array([row[0] for row in rows], dtype=float)
        bound = np.array([row[5] if mode == "map" else row[6] for row in rows], dtype=float)
        svg = loglog_svg([("replica mean D_A(theta_*, theta^n)", ns, [row[3] for row in rows]),
                          ("MAP bound" if mode == "map" else "O(1/n) bound", ns, bound)],
                         title=f"{mode} estimator, n0={n0}, {reps} replicas", xlabel="n", ylabel="D_A")
        (out / "experiment.svg").write_text(svg)
    return EXIT_OK


def cmd_verify(selector: str, out: Optional[Path], seed: int) -> int:
    try:
        results = vf.run_suite(selector, seed)
    except KeyError as err:
        raise ConfigError(str(err.args[0]), field="selector") from None
    lines = [vf.ROW_HEADER, *(r.row() for r in results)]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.csv").write_text(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


# ---------------------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smdvar", description="Stochastic mirror descent variance experiments")
    p.add_argument("--list", action="store_true", help="print the registry of (mirror, objective) pairs")
    sub = p.add_subparsers(dest="command")
    for name, helptext in (("run-smd", "run SMD and write a trace CSV"),
                           ("estimate-variance", "write a variance report CSV"),
                           ("gaussian-map", "Gaussian estimation replica experiments")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="TOML configuration file")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--seed", type=_u64, help="override the configured seed")
        s.add_argument("--replicas", type=_positive, help="number of independent replicas")
    s = sub.add_parser("verify", help="run identity and inequality checks")
    s.add_argument("selector", nargs="?", default=None, help="'all' or one check: " + ", ".join(vf.SUITES))
    s.add_argument("--config", help="optional TOML file with a [verify] table")
    s.add_argument("--out", help="also write verify.csv to this directory")
    s.add_argument("--seed", type=_u64)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        for name, entry in REGISTRY.items():
            print(f"{name}\t{entry.description}")
        return EXIT_OK
    if args.command is None:
        build_parser().print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "verify":
            cfg = load_config(args.config).get("verify", {}) if args.config else {}
            selector = args.selector or cfg.get("selector", "all")
            seed = args.seed if args.seed is not None else cfg.get("seed", 0)
            return cmd_verify(selector, Path(args.out) if args.out else None, seed)
        cfg = load_config(args.config)
        out = Path(args.out)
        if args.command == "run-smd":
            return cmd_run_smd(cfg, out, args.seed, args.replicas)
        if args.command == "estimate-variance":
            return cmd_estimate_variance(cfg, out, args.seed)
        return cmd_gaussian_map(cfg, out, args.seed, args.replicas)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DualRangeError as err:
        print(f"aborted: {err}", file=sys.stderr)
        return EXIT_ABORT
    except SMDError as err:
        print(f"aborted: {err}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
