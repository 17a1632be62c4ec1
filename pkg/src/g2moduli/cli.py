"""Command-line entry point ``g2moduli``.

    g2moduli SUBCOMMAND [--input FILE] [--output FILE] [--seed N] [--samples N]
                        [--tol.NAME VALUE ...] [--csv FILE]

Every flag may also come from the environment: G2MODULI_INPUT, G2MODULI_OUTPUT,
G2MODULI_SEED, G2MODULI_SAMPLES, G2MODULI_CSV and G2MODULI_TOL_<NAME> (name upper-cased,
dots as underscores).  Flags win over the environment.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad input, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import G2ModuliError
from .exterior7 import KForm
from .report import DEFAULT_TOLERANCES, RUNNERS, Config, run_verify

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3
SUBCOMMANDS = ("decompose", "metric", "star", "morse", "periods", "affine", "verify")
ENV_PREFIX = "G2MODULI_"

log = logging.getLogger("g2moduli")


class InputError(Exception):
    """Bad command line, environment or input file (exit code 2)."""


def parse_form_file(path):
    """Load a KForm (``{"degree", "coeffs"}``) or a matrix (``{"matrix": [[...]]}``) from JSON."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg})") from None
    if isinstance(d, dict) and "matrix" in d:
        try:
            M = np.array(d["matrix"], dtype=float)
        except (TypeError, ValueError):
            raise InputError(f"{path}: 'matrix' must be a list of numeric rows") from None
        if M.ndim != 2:
            raise InputError(f"{path}: 'matrix' must be two-dimensional")
        return M
    try:
        return KForm.from_dict(d)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_form_file(path, obj) -> None:
    """Inverse of :func:`parse_form_file`; floats are written with round-trip repr."""
    d = obj.to_dict() if isinstance(obj, KForm) else {"matrix": np.asarray(obj, dtype=float).tolist()}
    with open(path, "w") as fh:
        json.dump(d, fh)


def _load_input(path):
    if path is None:
        return None
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg})") from None
    if not isinstance(d, dict):
        raise InputError(f"{path}: input must be a JSON object")
    if "degree" in d:  # bare form file
        form = parse_form_file(path)
        return {"phi": form.to_dict()} if form.degree == 3 else {"form": form.to_dict()}
    if "matrix" in d:
        M = parse_form_file(path)
        if M.shape != (7, 7):
            raise InputError(f"{path}: matrix must be 7x7")
        return {"A": M.reshape(-1).tolist()}
    return d


def _positive_float(text: str, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise InputError(f"{what}: not a number: {text!r}") from None
    if not v >= 0 or v == float("inf"):
        raise InputError(f"{what}: must be a finite non-negative number")
    return v


def _split_tolerances(argv):
    """Pull ``--tol.NAME VALUE`` / ``--tol.NAME=VALUE`` out of argv."""
    rest, tols = [], {}
    it = iter(argv)
    for arg in it:
        if arg.startswith("--tol."):
            name, eq, value = arg[len("--tol."):].partition("=")
            if not eq:
                value = next(it, None)
                if value is None:
                    raise InputError(f"--tol.{name} needs a value")
            tols[name] = value
        else:
            rest.append(arg)
    return rest, tols


def _env_tolerances(environ):
    out = {}
    lookup = {n.upper().replace(".", "_"): n for n in list(DEFAULT_TOLERANCES) + ["all"]}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX + "TOL_"):
            name = key[len(ENV_PREFIX + "TOL_"):]
            if name not in lookup:
                raise InputError(f"{key}: unknown tolerance")
            out[lookup[name]] = value
    return out


def _resolve_tolerances(overrides: dict) -> dict:
    tols = dict(DEFAULT_TOLERANCES)
    if "all" in overrides:
        v = _positive_float(overrides["all"], "--tol.all")
        tols = {k: v for k in tols}
    for name, value in overrides.items():
        if name == "all":
            continue
        if name not in tols:
            raise InputError(f"unknown tolerance --tol.{name}")
        tols[name] = _positive_float(value, f"--tol.{name}")
    return tols


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="g2moduli", description="Numerical checks for G2 moduli geometry on the flat 7-torus.",
                epilog="Tolerances: --tol.NAME VALUE for any check name, or --tol.all VALUE.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--input", help="JSON input (form, matrix, moduli point, beta or patch spec)")
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    p.add_argument("--seed", help="integer seed for every random sample (default 0)")
    p.add_argument("--samples", help="random samples per check (default 10)")
    p.add_argument("--csv", help="affine: write per-sample rows (u, H, angle, det_p) here")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def make_config(argv, environ) -> tuple[str, Config, str | None, bool]:
    argv, tol_flags = _split_tolerances(list(argv))
    args = build_parser().parse_args(argv)
    env = {k: environ.get(ENV_PREFIX + k.upper()) for k in ("input", "output", "seed", "samples", "csv")}
    pick = lambda name: getattr(args, name) if getattr(args, name) is not None else env[name]  # noqa: E731
    try:
        seed = int(pick("seed") or 0)
        samples = int(pick("samples") or 10)
    except ValueError:
        raise InputError("--seed and --samples must be integers") from None
    if seed < 0 or samples < 1:
        raise InputError("--seed must be >= 0 and --samples >= 1")
    tols = _resolve_tolerances({**_env_tolerances(environ), **tol_flags})
    cfg = Config(seed=seed, samples=samples, tolerances=tols, input=_load_input(pick("input")),
                 csv_path=pick("csv"))
    return args.subcommand, cfg, pick("output"), args.verbose


def main(argv=None, environ=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    environ = os.environ if environ is None else environ
    try:
        sub, cfg, output, verbose = make_config(argv, environ)
    except InputError as exc:
        print(f"g2moduli: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, stream=sys.stderr)
    try:
        report = run_verify(cfg) if sub == "verify" else RUNNERS[sub](cfg)
    except (InputError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, G2ModuliError) and not isinstance(exc, ValueError):
            print(f"g2moduli: internal error: {exc}", file=sys.stderr)
            return EXIT_INTERNAL
        print(f"g2moduli: error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - contract: anything else is exit 3
        print(f"g2moduli: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    text = report.to_json()
    if output:
        try:
            with open(output, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"g2moduli: cannot write {output}: {exc.strerror}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    print(report.summary(), file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
