"""Config-driven experiment runner.

Subcommands::

    entecho quench        --config run.toml   # echo, entropy, variance, spectrum, transitions
    entecho loschmidt     --config run.toml   # whole-system Loschmidt rate and its cusps
    entecho transitions   --config run.toml   # re-run detection on a written series file
    entecho oracle-check [--config run.toml]  # exact many-body cross-validation (L <= 8)

Every file is plain CSV with a header row. Floats are written with ``repr`` so
that reruns with the same seed are byte-identical. Exit codes: 0 success,
1 oracle check failed, 2 configuration error, 3 numerical error.
"""
import argparse
import csv
import logging
import sys
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .config import U64_MAX, Config, load_config, parse_config
from .correlation import correlation_general
from .entanglement import entanglement_entropy, particle_number_variance
from .exceptions import ConfigInvalid, EntechoError, NumericalError
from .loschmidt import loschmidt_general, loschmidt_product
from .models import momenta
from .oracle import (
    build_ground_state,
    evolve,
    number_variance,
    one_body_density,
    oracle_echo,
    oracle_manifold_echo,
    schmidt,
)
from .series import BlockEvaluator, EchoEvaluator, _map, build_series, build_series_2d
from .transitions import detect_transitions

__all__ = [
    "ExperimentResult",
    "OracleReport",
    "run_experiment",
    "run_loschmidt",
    "run_transitions",
    "run_oracle_check",
    "main",
]

log = logging.getLogger("entecho")

SERIES_COLUMNS = (
    "t", "echo_mag", "echo_phase", "gamma", "echo_zero", "lambda_rate",
    "entropy", "variance", "occupied_count", "degenerate",
)
BLOCK_COLUMNS = ("ky",) + tuple(c for c in SERIES_COLUMNS if c != "lambda_rate")
SPECTRUM_COLUMNS = ("t", "index", "xi", "ky")
TRANSITION_COLUMNS = (
    "t_c", "kind", "ky", "gamma_left", "gamma_right", "discontinuity",
    "slope_left", "slope_right", "n_crossing",
)
LOSCHMIDT_COLUMNS = ("t", "lambda_mag", "lambda_phase", "lambda_rate")
ORACLE_COLUMNS = ("subsystem", "quantity", "max_deviation", "tolerance", "points", "passed")

DEFAULT_ORACLE = {
    "model": {"kind": "chain1d", "L": 8},
    "pre": {"mass": 1.5},
    "post": {"mass": 0.3},
    "subsystem": {"start": 0, "length": 4},
}


# --------------------------------------------------------------------- output

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigInvalid({"series": f"cannot read {path}: {exc.strerror}"}) from None


def _record_row(t, p, entropy, variance):
    return (t, p.magnitude, p.phase, p.rate, p.is_zero, entropy, variance, p.occupied_count, p.degenerate_flag)


def _series_rows(bundle):
    lam = bundle.lambda_rate
    for i, (t, p) in enumerate(zip(bundle.times, bundle.points)):
        row = _record_row(t, p, bundle.entropy[i], bundle.variance[i])
        yield row[:5] + (None if lam is None else lam[i],) + row[5:]


def _block_rows(blocks):
    for b in blocks:
        for i, (t, p) in enumerate(zip(b.times, b.points)):
            yield (b.ky,) + _record_row(t, p, b.entropy[i], b.variance[i])


def _spectrum_rows(bundles):
    times = bundles[0].times
    for i, t in enumerate(times):
        for b in bundles:
            for j, xi in enumerate(b.spectra[i]):
                yield (t, j, xi, b.ky)


def _transition_rows(events):
    for e in events:
        yield (e.t_c, e.kind.value, e.ky, e.gamma_left, e.gamma_right, e.discontinuity,
               e.slope_left, e.slope_right, e.n_crossing)


def _suffix(label):
    return f"_{label}" if label else ""


# ----------------------------------------------------------------- resolution

def _resolve(config):
    if isinstance(config, Config):
        return config
    if isinstance(config, dict):
        return parse_config(config)
    return load_config(config)


def _out_dir(config, out_dir):
    return Path(config.output.dir if out_dir is None else out_dir)


def _threads(config, threads):
    threads = config.run.threads if threads is None else int(threads)
    if threads < 1:
        raise ConfigInvalid({"run.threads": "must be >= 1"})
    return threads


def _check_seed(seed):
    if seed is not None and not 0 <= int(seed) <= U64_MAX:
        raise ConfigInvalid({"run.seed": "must be an unsigned 64-bit integer"})
    return seed


# ---------------------------------------------------------------- experiments

@dataclass
class ExperimentResult:
    """Bundles of one run keyed by subsystem label (``""`` for a single subsystem).

    In 2d ``bundles`` holds the product-echo bundle and ``blocks`` the
    per-``ky`` bundles.
    """

    config: Config
    bundles: dict
    blocks: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    @property
    def bundle(self):
        return next(iter(self.bundles.values()))

    @property
    def transitions(self):
        return {label: b.transitions for label, b in self.bundles.items()}


def run_experiment(config, out_dir=None, threads=None, seed=None, write=True):
    """Evaluate the configured quench on its time grid, detect transitions, write CSVs.

    ``config`` is a path, a mapping or a :class:`Config`. ``out_dir``,
    ``threads`` and ``seed`` override the file's values.
    """
    config = _resolve(config)
    threads = _threads(config, threads)
    seed = _check_seed(seed)
    times = config.times()
    settings = config.detector.settings()
    eps = config.detector.eps_deg
    want_lambda = config.physics.loschmidt and config.physics.temperature == 0
    result = ExperimentResult(config, {})

    for label, protocol in config.protocols(seed):
        start = _time.perf_counter()
        if protocol.ndim == 2:
            pairs, total = build_series_2d(protocol, times, threads, want_lambda, eps)
            total.label = label
            blocks = [b for b, _ in pairs]
            if config.detector.enabled:
                for b, ev in pairs:
                    b.transitions = detect_transitions(b, ev, settings)
                total.transitions = sorted((e for b in blocks for e in b.transitions), key=lambda e: (e.t_c, e.ky))
            result.blocks[label] = blocks
            bundle = total
        else:
            bundle, ev = build_series(protocol, times, config.physics.pathway, threads, want_lambda, eps, label)
            if config.detector.enabled:
                bundle.transitions = detect_transitions(bundle, ev, settings)
        result.bundles[label] = bundle
        log.info("%s: %d times in %.1f s, %d events", label or "series", len(bundle),
                 _time.perf_counter() - start, len(bundle.transitions))

    if write:
        result.files = _write_experiment(result, _out_dir(config, out_dir))
    return result


def _write_experiment(result, out):
    files = []
    for label, bundle in result.bundles.items():
        sfx = _suffix(label)
        files.append(_write_csv(out / f"series{sfx}.csv", SERIES_COLUMNS, _series_rows(bundle)))
        blocks = result.blocks.get(label)
        if blocks is not None:
            files.append(_write_csv(out / f"series_ky{sfx}.csv", BLOCK_COLUMNS, _block_rows(blocks)))
        if result.config.output.spectrum:
            files.append(_write_csv(out / f"spectrum{sfx}.csv", SPECTRUM_COLUMNS, _spectrum_rows(blocks or [bundle])))
        files.append(_write_csv(out / f"transitions{sfx}.csv", TRANSITION_COLUMNS, _transition_rows(bundle.transitions)))
    return files


def run_loschmidt(config, out_dir=None, threads=None, seed=None, write=True):
    """Loschmidt rate of the whole system on the grid, plus its detected cusps.

    Returns ``(points, events)``. Uniform models use the Bloch product,
    anything else the return-matrix determinant.
    """
    config = _resolve(config)
    if config.physics.temperature != 0:
        raise ConfigInvalid({"physics.temperature": "the Loschmidt echo needs temperature = 0"})
    threads = _threads(config, threads)
    seed = _check_seed(seed)
    _, protocol = config.protocols(seed)[0]
    fn = loschmidt_product if (protocol.pre.uniform and protocol.post.uniform) else loschmidt_general
    times = config.times()
    points = _map(lambda t: fn(protocol, t), times, threads)
    events = []
    if config.detector.enabled:
        series = SimpleNamespace(times=times, points=points, ky=None)
        events = detect_transitions(series, lambda t: fn(protocol, t), config.detector.settings())
    if write:
        out = _out_dir(config, out_dir)
        rows = ((p.time, p.magnitude, float(np.angle(p.amplitude)), p.rate) for p in points)
        _write_csv(out / "loschmidt.csv", LOSCHMIDT_COLUMNS, rows)
        _write_csv(out / "loschmidt_transitions.csv", TRANSITION_COLUMNS, _transition_rows(events))
    return points, events


def _rate_records(rows, key="gamma"):
    try:
        times = np.array([float(r["t"]) for r in rows])
        recs = [SimpleNamespace(rate=float(r[key])) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigInvalid({"series": f"malformed series file ({exc})"}) from None
    return times, recs


def run_transitions(config, series=None, out_dir=None, seed=None, write=True):
    """Re-run detection on series files written by ``quench``.

    Grid values are read back from the file; refinement evaluates the
    configured protocol off the grid. ``series`` overrides the input path (only
    for a single subsystem). Returns ``{label: [TransitionEvent]}``.
    """
    config = _resolve(config)
    seed = _check_seed(seed)
    out = _out_dir(config, out_dir)
    settings = config.detector.settings()
    eps = config.detector.eps_deg
    protocols = config.protocols(seed)
    if series is not None and len(protocols) > 1:
        raise ConfigInvalid({"series": "an explicit series file needs a single subsystem"})
    found = {}
    for label, protocol in protocols:
        sfx = _suffix(label)
        if protocol.ndim == 2:
            path = Path(series) if series else out / f"series_ky{sfx}.csv"
            rows = _read_csv(path)
            events = []
            for ky in momenta(protocol.Ly):
                sel = [r for r in rows if r.get("ky") and float(r["ky"]) == float(ky)]
                if not sel:
                    raise ConfigInvalid({"series": f"{path} has no rows for ky={float(ky)!r}"})
                times, recs = _rate_records(sel)
                ev = BlockEvaluator(protocol, ky, eps)
                events += detect_transitions(SimpleNamespace(times=times, points=recs, ky=ev.ky), ev, settings)
            events.sort(key=lambda e: (e.t_c, e.ky))
        else:
            path = Path(series) if series else out / f"series{sfx}.csv"
            times, recs = _rate_records(_read_csv(path))
            ev = EchoEvaluator(protocol, config.physics.pathway, eps)
            events = detect_transitions(SimpleNamespace(times=times, points=recs, ky=None), ev, settings)
        found[label] = events
        if write:
            _write_csv(out / f"transitions{sfx}.csv", TRANSITION_COLUMNS, _transition_rows(events))
    return found


# --------------------------------------------------------------------- oracle

@dataclass
class OracleReport:
    """Maximum deviation per compared quantity. ``rows`` follow ``ORACLE_COLUMNS``."""

    rows: list

    @property
    def passed(self):
        return all(r[-1] for r in self.rows)

    def deviation(self, quantity, subsystem=None):
        for r in self.rows:
            if r[1] == quantity and (subsystem is None or r[0] == subsystem):
                return r[2]
        raise KeyError(quantity)

    def lines(self):
        for sub, q, dev, tol, n, ok in self.rows:
            name = f"{sub}/{q}" if sub else q
            yield f"{'PASS' if ok else 'FAIL'}  {name:<24} max dev {dev:.3e}  (tol {tol:g}, {n} points)"


def run_oracle_check(config=None, out_dir=None, seed=None, write=True):
    """Compare the correlation-matrix route with exact Fock-space evolution.

    Per subsystem this reports the largest deviation of the state norm, the
    subsystem density matrix, the entropy, the number variance, the echo at
    non-degenerate times and the subspace echo at all times. ``config`` may
    be omitted for the default check (L = 8, L_A = 4, m 1.5 -> 0.3, 50 times).
    """
    config = _resolve(DEFAULT_ORACLE if config is None else config)
    if config.model.kind != "chain1d":
        raise ConfigInvalid({"model.kind": "the oracle handles chain1d only"})
    if config.physics.temperature != 0:
        raise ConfigInvalid({"physics.temperature": "the oracle handles temperature = 0 only"})
    seed = _check_seed(seed)
    tol = config.oracle.tolerance
    eps = config.detector.eps_deg
    times = np.linspace(0.0, config.oracle.t_max, config.oracle.times)
    rows = []
    for label, protocol in config.protocols(seed):
        psi0 = build_ground_state(protocol.pre)
        sites = [int(x) for x in protocol.subsystem_x]
        idx = protocol.basis_indices()
        ev = EchoEvaluator(protocol, config.physics.pathway, eps)
        top0 = schmidt(psi0, sites)
        dev = {k: [] for k in ("norm", "density", "entropy", "variance", "echo", "echo_subspace")}
        for t in times:
            psi = evolve(psi0, protocol.post, t)
            point, snap = ev.evaluate(t)
            rho = one_body_density(psi)[np.ix_(idx, idx)]
            dec = schmidt(psi, sites)
            dev["norm"].append(abs(psi.norm - 1.0))
            dev["density"].append(np.max(np.abs(rho - correlation_general(protocol, t).matrix)))
            dev["entropy"].append(abs(dec.entropy() - entanglement_entropy(snap)))
            dev["variance"].append(abs(number_variance(psi, sites) - particle_number_variance(snap)))
            if not point.degenerate_flag:
                dev["echo"].append(abs(oracle_echo(top0, dec, eps) - point.magnitude))
            dev["echo_subspace"].append(abs(oracle_manifold_echo(top0, dec, eps) - point.magnitude))
        for q, values in dev.items():
            worst = float(max(values)) if values else 0.0
            rows.append((label, q, worst, tol, len(values), worst < tol))
    report = OracleReport(rows)
    if write:
        _write_csv(_out_dir(config, out_dir) / "oracle_report.csv", ORACLE_COLUMNS, rows)
    return report


# ------------------------------------------------------------------------ CLI

def _u64(text):
    value = int(text, 0)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", type=Path, help="output directory (overrides [output] dir)")
    common.add_argument("--seed", type=_u64, help="PRNG seed for random profiles (overrides [run] seed)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="entecho", description="Entanglement echo quench experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quench", parents=[common], help="echo series, spectrum and transitions")
    q.add_argument("--config", type=Path, required=True)
    q.add_argument("--threads", type=_positive)

    lo = sub.add_parser("loschmidt", parents=[common], help="whole-system Loschmidt rate")
    lo.add_argument("--config", type=Path, required=True)
    lo.add_argument("--threads", type=_positive)

    tr = sub.add_parser("transitions", parents=[common], help="re-run detection on a series file")
    tr.add_argument("--config", type=Path, required=True)
    tr.add_argument("--series", type=Path, help="series CSV (default: <out-dir>/series.csv)")
    tr.add_argument("--threads", type=_positive, help="accepted for symmetry; detection is serial")

    oc = sub.add_parser("oracle-check", parents=[common], help="exact many-body cross-validation")
    oc.add_argument("--config", type=Path, help="omit for the default L=8 check")
    oc.add_argument("--threads", type=_positive, help="accepted for symmetry; the oracle is serial")
    return p


def _summarise(label, bundle):
    kinds = {}
    for e in bundle.transitions:
        kinds[e.kind.value] = kinds.get(e.kind.value, 0) + 1
    counts = ", ".join(f"{n} {k}" for k, n in sorted(kinds.items())) or "no transitions"
    return f"{label or 'series'}: {len(bundle)} times, {counts}"


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "quench":
            res = run_experiment(args.config, args.out_dir, args.threads, args.seed)
            for label, bundle in res.bundles.items():
                print(_summarise(label, bundle))
                for e in bundle.transitions:
                    where = "" if e.ky is None else f" ky={e.ky:.4f}"
                    print(f"  {e.kind.value:<14} t_c={e.t_c:.5f}{where} step={e.discontinuity:+.4f} crossings={e.n_crossing}")
        elif args.command == "loschmidt":
            _, events = run_loschmidt(args.config, args.out_dir, args.threads, args.seed)
            print(f"loschmidt: {len(events)} events")
            for e in events:
                print(f"  {e.kind.value:<14} t_c={e.t_c:.5f}")
        elif args.command == "transitions":
            for label, events in run_transitions(args.config, args.series, args.out_dir, args.seed).items():
                print(f"{label or 'series'}: {len(events)} events")
        else:
            report = run_oracle_check(args.config, args.out_dir, args.seed)
            for line in report.lines():
                print(line)
            return 0 if report.passed else 1
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except EntechoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
