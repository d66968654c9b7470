"""Command-line entry point: ``gkpdec <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import ConfigurationError, derive_rng
from . import experiments as ex
from . import nogo
from .gkp_single import NumericalFault
from .toric_channel import CycleError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVARIANT = 3

SEED_ENV = "GKPDEC_SEED"


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        vals = tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _tori(text):
    out = []
    for item in str(text).split(","):
        try:
            a, b = item.lower().split("x")
            out.append((int(a), int(b)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected LXxLY pairs like 4x2, got {item!r}")
    return tuple(out)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# key -> (converter, help); all are valid both as --flags and config-file keys
SWEEP_KEYS = {
    "sigma0_min": (float, "smallest sigma0 of the grid"),
    "sigma0_max": (float, "largest sigma0 of the grid (inclusive)"),
    "sigma0_step": (float, "grid spacing"),
    "sigma_m_ratio": (float, "GKP measurement noise as a multiple of sigma"),
    "sigma_t_ratio": (float, "toric measurement noise as a multiple of sigma"),
    "distances": (_int_list, "comma-separated lattice sizes, e.g. 3,5,7"),
    "rounds": (_int_list, "comma-separated round counts (gkp-single; toric-3d defaults to M = d)"),
    "trials": (int, "trials per grid point"),
    "decoder": (str, "ml|forward|dp|memoryless|passive|alg1|alg2|perfect-gkp"),
    "cutoff": (int, "winding cutoff K of the wrapped-Gaussian sums"),
    "seed": (int, f"master seed (falls back to ${SEED_ENV}, then 0)"),
    "workers": (int, "worker processes"),
    "out": (str, "output CSV path (a .json sidecar is written next to it)"),
    "block_size": (int, "trials per independently seeded block"),
    "gkp_info": (_bool, "toric-channel: use GKP readouts in the edge weights"),
}
NOGO_KEYS = {
    "tori": (_tori, "CV toric sizes, e.g. 2x2,3x2,4x2,5x5"),
    "random_codes": (int, "number of random symplectic codes"),
    "max_modes": (int, "largest n for the random codes"),
    "mc_samples": (int, "Monte-Carlo samples per code for the covariance check (0 to skip)"),
    "sigma0": (float, "noise strength for the Monte-Carlo check"),
    "seed": (int, f"master seed (falls back to ${SEED_ENV}, then 0)"),
    "out": (str, "output JSON path (stdout if omitted)"),
}
CROSSING_KEYS = {
    "bootstrap": (int, "bootstrap replicates"),
    "seed": (int, f"bootstrap seed (falls back to ${SEED_ENV}, then 0)"),
    "out": (str, "output JSON path (stdout if omitted)"),
}


def _add_keys(p, keys):
    for key, (conv, help_) in keys.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=conv, help=help_,
                       default=argparse.SUPPRESS)
    p.add_argument("--config", type=str, default=argparse.SUPPRESS,
                   help="flat key=value file with the same keys; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gkpdec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("gkp-single", "single-mode GKP decoders over repeated rounds"),
                        ("toric-channel", "toric-GKP code with perfect measurements"),
                        ("toric-3d", "toric-GKP code with noisy measurements")):
        _add_keys(sub.add_parser(name, help=help_), SWEEP_KEYS)
    _add_keys(sub.add_parser("nogo", help="logical-noise report for linear oscillator codes"),
              NOGO_KEYS)
    p = sub.add_parser("crossing", help="threshold estimate from sweep CSV files")
    p.add_argument("inputs", nargs="+", help="sweep CSV files")
    _add_keys(p, CROSSING_KEYS)
    return parser


def read_config_file(path, keys) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in keys:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = keys[key][0](value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return out


def _merged(ns, keys) -> dict:
    opts = vars(ns).copy()
    opts.pop("command", None)
    cfg_path = opts.pop("config", None)
    merged = read_config_file(cfg_path, keys) if cfg_path else {}
    merged.update(opts)
    if "seed" in keys and "seed" not in merged:
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                merged["seed"] = int(env)
            except ValueError:
                raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")
    return merged


def _run_sweep(experiment, opts) -> int:
    cfg = ex.ExperimentConfig(experiment=experiment, **opts)
    res = ex.run_sweep(cfg)
    if cfg.out is None:
        sys.stdout.write(res.to_csv())
    return EXIT_OK


def nogo_report(tori=((2, 2), (3, 2), (4, 2), (5, 5)), random_codes=0, max_modes=6,
                mc_samples=0, sigma0=0.3, seed=0) -> dict:
    """Eigenpairs, determinant and pairing residuals for each requested code."""
    if max_modes < 2:
        raise ConfigurationError("max-modes must be >= 2")
    codes = [(f"cv-toric-{lx}x{ly}", nogo.cv_toric_code(lx, ly)) for lx, ly in tori]
    rng = derive_rng(seed, 4, 0)
    for i in range(random_codes):
        n = int(rng.integers(2, max_modes + 1))
        k = int(rng.integers(1, n))
        codes.append((f"random-{i}-n{n}-k{k}", nogo.random_symplectic_code(rng, n, k)))
    report = []
    for idx, (name, code) in enumerate(codes):
        m = nogo.logical_noise(code, sigma0)
        entry = {
            "code": name, "n": code.n, "k": code.k,
            "lambda_p": m.lambda_p.tolist(), "lambda_q": m.lambda_q.tolist(),
            "det_sigma_inv": m.det,
            "pairing_residual": m.pairing_residual(),
            "symplectic_residual": code.symplectic_residual(),
        }
        if mc_samples > 0:
            r = nogo.sample_residual_logical(derive_rng(seed, 4, 1, idx), code, sigma0, mc_samples)
            cov = np.cov(r.T)
            target = m.covariance
            # standard error of a sample covariance entry under a Gaussian law
            se = np.sqrt((target ** 2 + np.outer(np.diag(target), np.diag(target))) / mc_samples)
            entry["mc_max_z"] = float(np.max(np.abs(cov - target) / se))
        report.append(entry)
    return {"sigma0": sigma0, "seed": seed, "codes": report}


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _run_crossing(inputs, opts) -> int:
    rows = []
    for path in inputs:
        try:
            rows.extend(ex.read_csv(path))
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}")
    est = ex.crossing_from_rows(rows, n_boot=opts.get("bootstrap", 500), seed=opts.get("seed", 0))
    out = []
    for (exp, dec, rm, rt), e in est.items():
        out.append({"experiment": exp, "decoder": dec, "sigma_m_ratio": rm, "sigma_t_ratio": rt,
                    "crossing": e.value, "ci_low": e.ci_low, "ci_high": e.ci_high,
                    "pairwise": [{"distances": list(p), "crossing": c} for p, c in e.pairwise],
                    "message": e.message or None})
    _emit_json(out, opts.get("out"))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cmd = ns.command
    try:
        if cmd == "nogo":
            opts = _merged(ns, NOGO_KEYS)
            out = opts.pop("out", None)
            _emit_json(nogo_report(**opts), out)
            return EXIT_OK
        if cmd == "crossing":
            inputs = ns.inputs
            del ns.inputs
            return _run_crossing(inputs, _merged(ns, CROSSING_KEYS))
        return _run_sweep(cmd, _merged(ns, SWEEP_KEYS))
    except (UsageError, ConfigurationError, nogo.CodeError) as exc:
        print(f"gkpdec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ex.InvariantViolation, NumericalFault, CycleError) as exc:
        print(f"gkpdec: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except KeyboardInterrupt:
        print("gkpdec: interrupted; finished points were written", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
