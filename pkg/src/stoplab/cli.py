"""Command-line interface: ``stoplab {threshold,regret,experiment,version}``.

Exit status is 0 on success (an experiment may still carry per-row errors),
2 for usage or configuration problems and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import __version__
from .bellman import (
    Discount,
    asymptotic_threshold,
    solve_threshold,
    threshold_sensitivity,
)
from .dist import DistSpec, variance
from .policy import PolicySpec, perturbed_regret, plugin_regret, plugin_regret_quadrature
from .simlab import (
    PHASE_COLUMNS,
    RESULT_COLUMNS,
    ExperimentGrid,
    PlugInRule,
    SimConfig,
    phase_report,
    run_experiment,
)

SCHEMA = "stoplab.experiment/1"
SEED_ENV = "STOPLAB_SEED"
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_TEXT_COLUMNS = {"policy", "error", "section"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    tool_version: str
    config_digest: str
    master_seed: int
    timestamp: str
    row_count: int
    kind: str = "grid"


# -- tables ----------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    return format(float(value), ".17g")


def write_table(rows: list[dict], columns, path) -> Path:
    """RFC 4180 CSV with a header row, UTF-8 and LF line endings."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


def read_table(path) -> list[dict]:
    """Inverse of :func:`write_table`; empty numeric cells come back as None."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for rec in reader:
            row = {}
            for c, v in zip(header, rec, strict=True):
                row[c] = v if c in _TEXT_COLUMNS else (None if v == "" else float(v))
            rows.append(row)
    return rows


# -- config ------------------------------------------------------------------------


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return d[key]


def _check_keys(d: dict, allowed: set[str], where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")


def _floats(v, where: str) -> list[float]:
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{where} must be a list of numbers")
    return [float(x) for x in v]


def _parse_policy(p: dict, where: str):
    _check_keys(p, {"kind", "epsilon", "n", "n_rule", "multiplier"}, where)
    kind = _need(p, "kind", where)
    if kind == "oracle":
        return PolicySpec.oracle()
    if kind == "perturbed":
        return PolicySpec.perturbed(float(_need(p, "epsilon", where)))
    if kind == "plugin":
        if "n_rule" in p:
            return PlugInRule(p["n_rule"], float(p.get("multiplier", 1.0)))
        n = _need(p, "n", where)
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigError(f"{where}: n must be an integer")
        return PolicySpec.plugin(n)
    raise ConfigError(f"{where}: unknown policy kind {kind!r}")


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _check_keys(cfg, {"schema", "kind", "seed", "reps", "horizon_cap", "parallelism", "grid", "phase", "title"}, "config")
    if cfg.get("schema") != SCHEMA:
        raise ConfigError(f"config schema must be {SCHEMA!r}")
    return cfg


def sim_config(cfg: dict, seed_override: int | None = None, parallelism: int | None = None) -> SimConfig:
    seed = cfg.get("seed", 0) if seed_override is None else seed_override
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return SimConfig(
        master_seed=seed,
        reps=cfg.get("reps", 10_000),
        horizon_cap=cfg.get("horizon_cap"),
        parallelism=cfg.get("parallelism", 1) if parallelism is None else parallelism,
    )


def build_grid(cfg: dict) -> ExperimentGrid:
    g = _need(cfg, "grid", "config")
    _check_keys(g, {"alphas", "thetas", "gammas", "policies", "perturbation_multipliers"}, "grid")
    policies = g.get("policies", [])
    if not isinstance(policies, list):
        raise ConfigError("grid.policies must be a list")
    return ExperimentGrid(
        alphas=_floats(_need(g, "alphas", "grid"), "grid.alphas"),
        thetas=_floats(_need(g, "thetas", "grid"), "grid.thetas"),
        gammas=_floats(_need(g, "gammas", "grid"), "grid.gammas"),
        policy_specs=[_parse_policy(p, f"grid.policies[{i}]") for i, p in enumerate(policies)],
        perturbation_multipliers=_floats(g.get("perturbation_multipliers", []), "grid.perturbation_multipliers"),
    )


def _phase_args(cfg: dict) -> dict:
    p = _need(cfg, "phase", "config")
    _check_keys(p, {"alpha", "theta", "gammas", "multipliers"}, "phase")
    gammas = _floats(_need(p, "gammas", "phase"), "phase.gammas")
    for gm in gammas:
        Discount(gm)
    return dict(
        alpha=DistSpec(float(_need(p, "alpha", "phase")), 0.0).alpha,
        theta=float(p.get("theta", 0.0)),
        gammas=gammas,
        multipliers=_floats(_need(p, "multipliers", "phase"), "phase.multipliers"),
    )


def shipped_config(name: str) -> Path:
    """Path of a config bundled with the package, e.g. ``fig1.json``."""
    return Path(str(resources.files("stoplab") / "configs" / name))


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


# -- commands ----------------------------------------------------------------------


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")


def cmd_threshold(args) -> int:
    dist, disc = DistSpec(args.alpha, args.theta), Discount(args.gamma)
    th = solve_threshold(dist, disc, tol=args.tol)
    _emit(
        {
            "s_star": th.value,
            "residual": th.residual,
            "iterations": th.iterations,
            "asymptotic": asymptotic_threshold(dist, disc),
            "sensitivity": threshold_sensitivity(dist, disc, th.value),
        }
    )
    return 0


def cmd_regret(args, parser) -> int:
    truth, disc = DistSpec(args.alpha, args.theta), Discount(args.gamma)
    out = {"mode": args.mode, "alpha": truth.alpha, "theta": truth.theta, "gamma": disc.gamma}
    if args.mode == "perturb":
        if (args.epsilon is None) == (args.z is None):
            parser.error("--mode perturb needs exactly one of --epsilon or --z")
        if args.n is not None or args.reps is not None or args.exact:
            parser.error("--n, --reps and --exact only apply to --mode plugin")
        eps = args.epsilon if args.z is None else args.z * math.sqrt(variance(truth.alpha))
        rep = perturbed_regret(truth, disc, eps)
        out.update(epsilon=eps, z=args.z)
    else:
        if args.epsilon is not None or args.z is not None:
            parser.error("--epsilon and --z only apply to --mode perturb")
        if args.n is None:
            parser.error("--mode plugin needs --n")
        if args.exact and args.reps is not None:
            parser.error("--exact and --reps are mutually exclusive")
        if args.exact:
            if args.n != 1:
                parser.error("--exact is only available with --n 1")
            rep = plugin_regret_quadrature(truth, disc)
        else:
            if args.reps is None:
                parser.error("--mode plugin needs --reps or --exact")
            seed = args.seed if args.seed is not None else (_env_seed() or 0)
            rep = plugin_regret(truth, disc, args.n, args.reps, seed=seed, parallelism=args.parallelism)
            out.update(seed=seed, reps=args.reps)
        out.update(n=args.n, exact=bool(args.exact))
    out.update(rep.to_dict())
    _emit(out)
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    kind = cfg.get("kind", "grid")
    env_seed = _env_seed()
    sim = sim_config(cfg, env_seed, args.parallelism)
    if kind == "grid":
        grid = build_grid(cfg)
        rows, columns = run_experiment(grid, sim), RESULT_COLUMNS
    elif kind == "phase":
        rows, columns = phase_report(config=sim, **_phase_args(cfg)), PHASE_COLUMNS
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table(rows, columns, out / "results.csv")
    manifest = RunManifest(
        tool_version=__version__,
        config_digest=config_digest(cfg),
        master_seed=sim.master_seed,
        timestamp=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        row_count=len(rows),
        kind=kind,
    )
    (out / "manifest.json").write_text(json.dumps(asdict(manifest), indent=2) + "\n", encoding="utf-8")
    if args.plot:
        from .plotting import plot_experiment, plot_phase

        (plot_phase if kind == "phase" else plot_experiment)(rows, out / "plot.svg")
    n_err = sum(1 for r in rows if r.get("error"))
    print(f"wrote {len(rows)} rows to {out / 'results.csv'}" + (f" ({n_err} with errors)" if n_err else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stoplab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--alpha", type=float, required=True, help="shape, at least 0.5")
        p.add_argument("--theta", type=float, required=True, help="location")
        p.add_argument("--gamma", type=float, required=True, help="discount factor in (0, 1)")

    p = sub.add_parser("threshold", help="solve for the optimal stopping threshold")
    model_flags(p)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("regret", help="relative regret of a perturbed or plug-in rule")
    model_flags(p)
    p.add_argument("--mode", choices=("perturb", "plugin"), required=True)
    p.add_argument("--epsilon", type=float, help="location error of the perturbed rule")
    p.add_argument("--z", type=float, help="location error in standard deviations")
    p.add_argument("--n", type=int, help="exploration draws for the plug-in rule")
    p.add_argument("--reps", type=int, help="Monte Carlo replications")
    p.add_argument("--exact", action="store_true", help="integrate by quadrature (N=1 only)")
    p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(subparser=p)

    p = sub.add_parser("experiment", help="run a JSON-configured sweep")
    p.add_argument("config", help="config path, or the name of a shipped config such as fig1.json")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--plot", action="store_true", help="also write plot.svg")
    p.add_argument("--parallelism", type=int, help="override the config's thread count")

    sub.add_parser("version", help="print the tool version")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "threshold":
            return cmd_threshold(args)
        if args.command == "regret":
            return cmd_regret(args, args.subparser)
        if args.command == "experiment":
            if not Path(args.config).exists() and shipped_config(args.config).exists():
                args.config = str(shipped_config(args.config))
            return cmd_experiment(args)
        print(__version__)
        return 0
    except ArithmeticError as exc:
        print(f"stoplab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"stoplab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
