"""Command line entry point.

    dryfriction <subcommand> --config PATH [--seed N] [--out DIR]
    dryfriction verify --manifest PATH [--out DIR]

Subcommands: ``simulate``, ``pin-threshold``, ``hysteresis``, ``eps-study``,
``ensemble``. Every run writes its artifacts plus ``manifest.json`` (the
normalized config, seeds and SHA-256 checksums) into the output directory.
``verify`` re-runs a manifest and compares checksums. Failures print an error
JSON object on stderr and exit nonzero.
"""
import argparse
import os
import sys
import tempfile

from . import config as cfgmod, kernels, rng, serialize
from .errors import ConfigurationError, ContractError, NumericalFailure
from .experiments import (
    epsilon_convergence_study,
    ensemble_statistics,
    estimate_pinning_threshold,
    relaxation_time,
    run_hysteresis,
)
from .obstacle_field import sample_field
from .render import render_profile_svg
from .solver import State, run_until

SUBCOMMANDS = ("simulate", "pin-threshold", "hysteresis", "eps-study", "ensemble")
MANIFEST = "manifest.json"


def _write(out, name, text, artifacts):
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    artifacts[name] = serialize.sha256_file(path)


def _svg(cfg, out, name, state, field, artifacts):
    if cfg["run.svg"] == "yes" and cfg.grid.n == 1:
        render_profile_svg(state, field, os.path.join(out, name))
        artifacts[name] = serialize.sha256_file(os.path.join(out, name))


def _simulate(cfg, field, out, artifacts):
    r = run_until(State.zeros(cfg.grid), field, cfg.forcing, cfg.solver,
                  stop_when_stationary=cfg.forcing.is_time_constant())
    _write(out, "trajectory.csv", r.summary_csv(), artifacts)
    _write(out, "final_state.json", r.state.to_json(), artifacts)
    _write(out, "result.json", serialize.dumps({"outcome": r.outcome, "steps": r.steps, "t": r.state.t}), artifacts)
    _svg(cfg, out, "profile.svg", r.state, field, artifacts)


def _pin(cfg, field, out, artifacts):
    rep = estimate_pinning_threshold(field, cfg.grid, cfg.solver, cfg["pinning.F_init_hi"],
                                     cfg["pinning.steps"], cfg["pinning.max_doublings"])
    _write(out, "pinning_report.json", rep.to_json(), artifacts)
    _svg(cfg, out, "pinned_profile.svg", rep.profile, field, artifacts)
    return rep


def _hysteresis(cfg, field, out, artifacts):
    F_lo = cfg["hysteresis.F_lo"]
    if F_lo is None:
        F_lo = _pin(cfg, field, out, artifacts).F_lo
    A = cfg["hysteresis.amplitude_fraction"] * F_lo
    tau = relaxation_time(field, cfg.grid, A, cfg.solver)
    period = cfg["hysteresis.period"]
    if period is None:
        period = cfg["hysteresis.period_factor"] * tau
    rep = run_hysteresis(field, cfg.grid, A, period, cfg.solver, F_lo, cycles=cfg["hysteresis.cycles"],
                         samples_per_quarter=cfg["hysteresis.samples_per_quarter"], relaxation=tau)
    _write(out, "hysteresis.json", rep.to_json(), artifacts)
    _write(out, "hysteresis.csv", rep.samples_csv(), artifacts)
    if rep.companion_samples is not None:
        _write(out, "hysteresis_2P.csv", rep.companion_csv(), artifacts)


def _eps(cfg, field, out, artifacts):
    rep = epsilon_convergence_study(field, cfg.grid, cfg["eps.force"], cfg["eps.values"], cfg.solver,
                                    T_study=cfg["eps.T"], samples=cfg["eps.samples"])
    _write(out, "eps_study.json", rep.to_json(), artifacts)


def _ensemble(cfg, field, out, artifacts):
    res = ensemble_statistics(cfg.obstacle, cfg.ensemble_seeds(), cfg.grid, cfg.solver,
                              cfg["pinning.F_init_hi"], cfg["pinning.steps"])
    res = {k: v for k, v in res.items() if k != "reports"}
    _write(out, "ensemble.json", serialize.dumps(res), artifacts)


_HANDLERS = {
    "simulate": _simulate,
    "pin-threshold": _pin,
    "hysteresis": _hysteresis,
    "eps-study": _eps,
    "ensemble": _ensemble,
}


def dispatch(subcommand, cfg, out):
    """Run ``subcommand`` with ``cfg``, writing artifacts and the manifest
    into ``out``. Returns the manifest dict."""
    if subcommand not in _HANDLERS:
        raise ConfigurationError(f"unknown subcommand {subcommand!r}")
    os.makedirs(out, exist_ok=True)
    field = sample_field(cfg.obstacle)
    artifacts = {}
    _HANDLERS[subcommand](cfg, field, out, artifacts)
    manifest = {
        "tool": "dryfriction",
        "subcommand": subcommand,
        "config": cfgmod.dump(cfg),
        "seeds": {
            "master": cfg.seed,
            "field": cfg.field_seed,
            "ensemble": cfg.ensemble_seeds() if subcommand == "ensemble" else [],
        },
        "generator": rng.GENERATOR_NAME,
        "kernel": kernels.ACTIVE_NAME,
        "artifacts": dict(sorted(artifacts.items())),
    }
    with open(os.path.join(out, MANIFEST), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize.dumps(manifest))
    return manifest


def verify_manifest(path, out=None):
    """Re-run the manifest at ``path`` and compare artifact checksums."""
    with open(path, encoding="utf-8") as fh:
        manifest = serialize.loads(fh.read())
    cfg = cfgmod.parse_config(manifest["config"])
    if out is None:
        out = tempfile.mkdtemp(prefix="dryfriction-verify-")
    fresh = dispatch(manifest["subcommand"], cfg, out)
    mismatched = sorted(
        name for name in set(manifest["artifacts"]) | set(fresh["artifacts"])
        if manifest["artifacts"].get(name) != fresh["artifacts"].get(name)
    )
    return {"ok": not mismatched, "mismatched": mismatched, "out": out}


def _parser():
    p = argparse.ArgumentParser(prog="dryfriction", description="Interface evolution with dry friction in random obstacle fields.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=int)
        s.add_argument("--out", default=None)
    v = sub.add_parser("verify")
    v.add_argument("--manifest", required=True)
    v.add_argument("--out", default=None)
    return p


def _fail(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc)}
    step = getattr(exc, "step", None)
    if step is not None:
        err["step"] = step
    sys.stderr.write(serialize.dumps(err, indent=None) + "\n")
    return code


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            res = verify_manifest(args.manifest, args.out)
            sys.stdout.write(serialize.dumps(res) + "\n")
            return 0 if res["ok"] else 1
        cfg = cfgmod.load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = args.out or os.path.join("runs", f"{args.command}-seed{cfg.seed}")
        manifest = dispatch(args.command, cfg, out)
        sys.stdout.write(serialize.dumps({"out": out, "artifacts": manifest["artifacts"]}) + "\n")
        return 0
    except (ConfigurationError, ContractError) as exc:
        return _fail(exc, 2)
    except (NumericalFailure, OSError, ValueError, KeyError) as exc:
        return _fail(exc, 1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
