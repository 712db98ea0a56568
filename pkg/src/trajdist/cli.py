"""Command-line front end.

::

    trajdist analytic   --config run.json --out results/
    trajdist montecarlo --config run.json --out results/ --seed 7 --workers 4
    trajdist lindblad   --config run.json --out results/
    trajdist compare    --config run.json --out results/

Exit status is 0 on success, 2 when the input is invalid and 3 when a
numerical guard trips (negative deposited mass, trace drift, a transfer
family without a common eigenbasis, ...).
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .analytic import (
    ImaginaryResidue,
    NegativeWeight,
    first_moment,
    trajectory_distribution,
)
from .config import ConfigError, RunConfig, load_config
from .core import NonCommutingFamily, spectral_decompose
from .io import write_csv, write_distribution_csv, write_json, write_ndjson
from .lindblad import TraceDrift, integrate_lindblad, qubit_bloch_solution
from .models import NegativeMass
from .montecarlo import GridMismatch, default_workers, distribution_distance, run_ensemble
from .volterra import StepTooLarge

__all__ = ["main", "cmd_analytic", "cmd_montecarlo", "cmd_lindblad", "cmd_compare"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

_GUARDS = (NegativeWeight, ImaginaryResidue, TraceDrift, NonCommutingFamily, NegativeMass, StepTooLarge)


def _log(msg):
    print(f"trajdist: {msg}", file=sys.stderr)


def _manifest(config, out, command, workers):
    write_json(
        os.path.join(out, f"{config.prefix}_{command}_run.json"),
        {
            "command": command,
            "version": __version__,
            "config_sha256": config.digest(),
            "workers": workers,
            "config": config.to_dict(),
        },
    )


def _spectrum(system, times):
    from .analytic import _sample_times

    return spectral_decompose(system, _sample_times(float(np.max(times))))


def _analytic_laws(config, system, workers):
    times = config.time_values()
    edges = config.edges(system)
    spec = _spectrum(system, times) if np.any(times > 0) else None
    laws = []
    for t in times:
        dist, spec, vol = trajectory_distribution(
            system, float(t), edges, h=config.h, workers=workers, spectrum=spec
        )
        m1 = first_moment(system, spec, vol, float(t)) if vol else float(dist.moment(1))
        laws.append((float(t), dist, m1))
    return laws, spec


def cmd_analytic(config, out, workers=1):
    """Exact distributions and moments for every configured time."""
    system = config.system()
    laws, _ = _analytic_laws(config, system, workers)
    moments = []
    for i, (t, dist, m1) in enumerate(laws):
        write_distribution_csv(os.path.join(out, f"{config.prefix}_analytic_t{i:03d}.csv"), dist)
        moments.append(
            {
                "t": t,
                "m1": dist.moment(1),
                "m2": dist.moment(2),
                "m4": dist.moment(4),
                "mass_check": dist.total_mass(),
                "m1_resolvent": m1,
            }
        )
    write_json(os.path.join(out, f"{config.prefix}_analytic_moments.json"), moments)
    return moments


def cmd_montecarlo(config, out, workers=1):
    """Ensemble histograms and moments with standard errors."""
    system = config.system()
    edges = config.edges(system)
    dump = bool(config.monte_carlo.get("dump_trajectories", False))
    summaries = []
    for i, t in enumerate(config.time_values()):
        stats = run_ensemble(system, float(t), config.n_traj, config.base_seed, workers, edges, keep_records=dump)
        write_distribution_csv(os.path.join(out, f"{config.prefix}_montecarlo_t{i:03d}.csv"), stats)
        if dump:
            write_ndjson(os.path.join(out, f"{config.prefix}_trajectories_t{i:03d}.ndjson"), stats.records)
        summaries.append(stats.summary())
    write_json(os.path.join(out, f"{config.prefix}_montecarlo_moments.json"), summaries)
    return summaries


def _bloch(rho):
    r = rho.rho
    return 2 * r[0, 1].real, -2 * r[0, 1].imag, (r[0, 0] - r[1, 1]).real


def cmd_lindblad(config, out, workers=1):
    """Averaged-state trajectories: Bloch components or site densities."""
    system = config.system()
    times = config.time_values()
    dt = config.lindblad.get("dt")
    states = integrate_lindblad(system, times, dt=dt)
    if config.model == "qubit":
        params = config.model_params()
        _, my_x, mz_x = qubit_bloch_solution(params, times)
        rows = []
        for t, rho, my_e, mz_e in zip(times, states, my_x, mz_x):
            mx, my, mz = _bloch(rho)
            rows.append((float(t), mx, my, mz, float(my_e), float(mz_e)))
        write_csv(
            os.path.join(out, f"{config.prefix}_lindblad.csv"),
            ["t", "m_x", "m_y", "m_z", "m_y_closed", "m_z_closed"],
            rows,
        )
        return rows
    sites = system.observable_values if config.model == "hopping" else np.arange(system.dim)
    antipode = (system.initial_index + system.dim // 2) % system.dim
    rows = []
    for t, rho in zip(times, states):
        n = rho.populations
        if config.model == "hopping" and n[antipode] > 1e-8:
            _log(f"warning: occupation {n[antipode]:.2e} at the ring antipode at t={t}; enlarge the ring")
        if abs(n.sum() - 1) > 1e-6:
            raise TraceDrift(f"site densities sum to {n.sum():.9f} at t={t}")
        rows.extend((float(t), float(j), float(v)) for j, v in zip(sites, n))
    write_csv(os.path.join(out, f"{config.prefix}_lindblad.csv"), ["t", "j", "n"], rows)
    return rows


def cmd_compare(config, out, workers=1):
    """Cross-check analytic, Monte Carlo and Lindblad routes; writes a JSON report."""
    system = config.system()
    laws, _ = _analytic_laws(config, system, workers)
    against = config.compare.get("against", "montecarlo")
    ks_max = float(config.compare.get("ks_max", 0.02))
    sigma_max = float(config.compare.get("sigma_max", 4.0))
    lind_tol = float(config.compare.get("lindblad_tol", 1e-4))
    times = [t for t, _, _ in laws]
    states = integrate_lindblad(system, times, dt=config.lindblad.get("dt"))
    entries = []
    for (t, dist, m1), rho in zip(laws, states):
        if against == "self":
            other, se = dist, {k: 0.0 for k in (1, 2, 4)}
        else:
            other = run_ensemble(system, t, config.n_traj, config.base_seed, workers, dist.edges)
            se = {k: other.moment_se(k) for k in (1, 2, 4)}
        ks = distribution_distance(other, dist)
        moments = {}
        for k in (1, 2, 4):
            exact, emp = dist.moment(k), other.moment(k)
            delta = emp - exact
            # differences at round-off level (t = 0, where every sample is identical) count as zero
            floor = 1e-12 * max(1.0, abs(exact))
            sig = 0.0 if abs(delta) <= floor else delta / max(se[k], floor)
            moments[f"m{k}"] = {"analytic": exact, "other": emp, "delta": delta, "se": se[k], "delta_sigma": sig}
        lind = rho.expectation(system.observable_values)
        resid = lind - m1
        ok = ks < ks_max and abs(resid) < lind_tol and all(abs(m["delta_sigma"]) <= sigma_max for m in moments.values())
        entries.append(
            {
                "t": t,
                "ks": ks,
                "moments": moments,
                "lindblad_m1": lind,
                "resolvent_m1": m1,
                "lindblad_residual": resid,
                "pass": bool(ok),
            }
        )
    report = {
        "against": against,
        "thresholds": {"ks_max": ks_max, "sigma_max": sigma_max, "lindblad_tol": lind_tol},
        "pass": all(e["pass"] for e in entries),
        "entries": entries,
    }
    write_json(os.path.join(out, f"{config.prefix}_compare.json"), report)
    return report


COMMANDS = {
    "analytic": cmd_analytic,
    "montecarlo": cmd_montecarlo,
    "lindblad": cmd_lindblad,
    "compare": cmd_compare,
}


def _parser():
    p = argparse.ArgumentParser(prog="trajdist", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"trajdist {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__.split("\n")[0])
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, help="override monte_carlo.base_seed (unsigned 64-bit)")
        sp.add_argument("--workers", type=int, help="worker threads (default: config, then TRAJDIST_WORKERS, then 1)")
    return p


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        config = load_config(args.config)
        raw = config.to_dict()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            raw["monte_carlo"]["base_seed"] = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be positive")
            raw["monte_carlo"]["workers"] = args.workers
        config = RunConfig.from_dict(raw)
        workers = int(config.monte_carlo["workers"]) if "workers" in config.monte_carlo else default_workers()
        os.makedirs(args.out, exist_ok=True)
        COMMANDS[args.command](config, args.out, workers)
        _manifest(config, args.out, args.command, workers)
    except _GUARDS as exc:
        _log(f"numerical guard: {exc}")
        return EXIT_NUMERICAL
    except (ConfigError, GridMismatch) as exc:
        _log(f"invalid input: {exc}")
        return EXIT_INVALID
    except ArithmeticError as exc:
        _log(f"numerical guard: {exc}")
        return EXIT_NUMERICAL
    except ValueError as exc:
        _log(f"invalid input: {exc}")
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
