"""Command-line driver: forward scattering, zero finding, reconstruction, sweeps.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 admissible-class violation. Output files are written only after all
computation succeeded, each through a temporary file and an atomic rename.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, NearSingularError, ResolabError
from .jost import scattering_matrix, w_and_s
from .potential import Potential, load_potential, norm_l1
from .reconstruct import (ReconParams, ReconstructionResult, perturb_zero_set,
                          reconstruct_antiderivative, reference_zeros, zero_potential_pipeline)
from .zeros import ZeroSet, locate_zeros

log = logging.getLogger("resolab")

COMMANDS = ("forward", "find-zeros", "reconstruct", "stability-sweep", "zero-potential")
IM_BOUND = 40.0


@dataclass
class RunConfig:
    """Validated command-line configuration."""

    command: str
    potential_path: str
    R: float = 40.0
    epsilon: float = 0.0
    p: float = 2.0
    eta: float | None = None
    output_dir: str = "out"
    seed: int = 0
    reference_path: str | None = None
    radii: list[float] = field(default_factory=lambda: [20.0, 40.0, 80.0])
    epsilons: list[float] = field(default_factory=lambda: [0.0, 1e-6, 1e-5, 1e-4])
    relaxed: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.R > 0 or any(r <= 0 for r in self.radii):
            raise ConfigError("radius must be positive")
        if self.epsilon < 0 or any(e < 0 for e in self.epsilons):
            raise ConfigError("epsilon must be nonnegative")
        if not 1.0 < self.p <= 2.0:
            raise ConfigError("p must lie in (1, 2]")
        if self.eta is not None and not self.eta > 0:
            raise ConfigError("eta must be positive")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="resolab", description=__doc__.splitlines()[0])
    ap.add_argument("--command", required=True, choices=COMMANDS)
    ap.add_argument("--potential", required=True, help="potential JSON file")
    ap.add_argument("--reference", default=None, help="reference potential JSON (reconstruct, sweep)")
    ap.add_argument("--radius", type=float, default=40.0, help="zero-data radius R")
    ap.add_argument("--epsilon", type=float, default=0.0, help="zero perturbation size")
    ap.add_argument("--p", type=float, default=2.0, help="Lebesgue exponent in (1, 2]")
    ap.add_argument("--eta", type=float, default=None, help="exclusion distance around s zeros")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="perturbation RNG seed")
    ap.add_argument("--radii", default="20,40,80", help="sweep radii (comma separated)")
    ap.add_argument("--epsilons", default="0,1e-6,1e-5,1e-4", help="sweep epsilons")
    ap.add_argument("--relaxed", action="store_true",
                    help="zero-potential: only require a single zero in the small disk")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def parse_config(argv: list[str] | None = None) -> RunConfig:
    a = build_parser().parse_args(argv)
    if a.command in ("reconstruct", "stability-sweep") and a.reference is None:
        raise ConfigError(f"--reference is required for {a.command}")
    return RunConfig(a.command, a.potential, a.radius, a.epsilon, a.p, a.eta, a.out, a.seed,
                     a.reference, _floats(a.radii), _floats(a.epsilons), a.relaxed)


# ------------------------------------------------------------------ output
def _fmt(v) -> str:
    return f"{float(v):.12e}"


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _commit(out_dir: str, files: dict[str, str]) -> list[Path]:
    paths = []
    for name, text in files.items():
        p = Path(out_dir) / name
        write_atomic(p, text)
        paths.append(p)
    return paths


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=float) + "\n"


# ---------------------------------------------------------------- helpers
def _zeros_w(q: Potential, R: float) -> ZeroSet:
    ib = IM_BOUND if R > IM_BOUND else None
    return locate_zeros(lambda z: w_and_s(q, z)[0], R, im_bound=ib, tag="w")


def _zeros(q: Potential, R: float) -> tuple[ZeroSet, ZeroSet]:
    ib = IM_BOUND if R > IM_BOUND else None
    zs = locate_zeros(lambda z: w_and_s(q, z)[1], R, im_bound=ib, tag="s")
    return _zeros_w(q, R), zs


def _truth(q: Potential, ref: Potential | None, x: np.ndarray) -> np.ndarray:
    t = q.tail_integral(x)
    return t - ref.tail_integral(x) if ref is not None else t


def _recon_files(res: ReconstructionResult, truth: np.ndarray) -> dict[str, str]:
    err = np.abs(res.antiderivative - truth)
    diag = dict(res.diagnostics)
    diag["measured_sup_err"] = float(np.max(err))
    return {
        "reconstruction.csv": _csv_text(["x", "Q", "Q_true", "abs_err"],
                                        zip(res.x, res.antiderivative, truth, err)),
        "kernel_line.csv": _csv_text(["t", "K_line"], zip(res.t, res.kernel_line)),
        "diagnostics.json": _json(diag),
    }


def _pool_size() -> int:
    """Worker count from RESOLAB_THREADS; one worker when numba's threading
    layer does not allow concurrent calls."""
    try:
        n = max(1, int(os.environ.get("RESOLAB_THREADS", "1")))
    except ValueError as exc:
        raise ConfigError("RESOLAB_THREADS must be an integer") from exc
    try:
        import numba
        if numba.threading_layer() == "workqueue":
            return 1
    except ValueError:
        return 1
    return n


# --------------------------------------------------------------- commands
def cmd_forward(cfg: RunConfig) -> list[Path]:
    q = load_potential(cfg.potential_path)
    x = np.linspace(-cfg.R, cfg.R, 400)  # even count: z = 0 is not a node
    w, s = w_and_s(q, x.astype(complex))
    sp = w_and_s(q, -x.astype(complex))[1]
    resid = np.full(x.size, np.nan)
    for k, z in enumerate(x):
        try:
            S = scattering_matrix(q, float(z))
            resid[k] = float(np.max(np.abs(S @ S.conj().T - np.eye(2))))
        except NearSingularError:
            pass
    rows = [(z, a.real, a.imag, b.real, b.imag, c.real, c.imag, "nan" if np.isnan(r) else r)
            for z, a, b, c, r in zip(x, w, s, sp, resid)]
    real_csv = _csv_text(["z", "w_re", "w_im", "s_minus_re", "s_minus_im", "s_plus_re",
                          "s_plus_im", "unitarity_residual"], rows)
    ym = min(cfg.R, 5.0)
    X, Y = np.meshgrid(np.linspace(-cfg.R, cfg.R, 41), np.linspace(-ym, ym, 21))
    Z = (X + 1j * Y).ravel()
    wm, sm = w_and_s(q, Z)
    mesh_csv = _csv_text(["re", "im", "w_re", "w_im", "s_re", "s_im"],
                         zip(Z.real, Z.imag, wm.real, wm.imag, sm.real, sm.imag))
    w0 = complex(w_and_s(q, 0.0)[0])
    summary = {"label": q.label, "l1_norm": norm_l1(q), "w0": [w0.real, w0.imag],
               "max_unitarity_residual": float(np.nanmax(resid)) if np.any(~np.isnan(resid)) else None}
    return _commit(cfg.output_dir, {"forward_real.csv": real_csv, "forward_mesh.csv": mesh_csv,
                                    "forward_summary.json": _json(summary)})


def cmd_find_zeros(cfg: RunConfig) -> list[Path]:
    q = load_potential(cfg.potential_path)
    zw, zs = _zeros(q, cfg.R)
    return _commit(cfg.output_dir, {"zeros_w.json": _json(zw.to_dict()),
                                    "zeros_s.json": _json(zs.to_dict())})


def _params(cfg: RunConfig, R: float, eps: float) -> ReconParams:
    return ReconParams(R, epsilon=eps, eta=cfg.eta, p=cfg.p)


def cmd_reconstruct(cfg: RunConfig) -> list[Path]:
    q = load_potential(cfg.potential_path)
    ref = load_potential(cfg.reference_path)
    zw, zs = _zeros(q, cfg.R)
    rng = np.random.default_rng(cfg.seed)
    zw, zs = perturb_zero_set(zw, cfg.epsilon, rng), perturb_zero_set(zs, cfg.epsilon, rng)
    res = reconstruct_antiderivative(zw, zs, ref, _params(cfg, cfg.R, cfg.epsilon))
    return _commit(cfg.output_dir, _recon_files(res, _truth(q, ref, res.x)))


def sweep_rows(cfg: RunConfig) -> list[tuple[float, float, float, float, float]]:
    """(R, epsilon, measured, predicted, ratio) in deterministic grid order."""
    q = load_potential(cfg.potential_path)
    ref = load_potential(cfg.reference_path)
    cells = []
    for iR, R in enumerate(cfg.radii):
        zw, zs = _zeros(q, R)
        ref_sets = reference_zeros(ref, R, IM_BOUND if R > IM_BOUND else None)
        for ie, eps in enumerate(cfg.epsilons):
            cells.append((iR, ie, R, eps, zw, zs, ref_sets))

    def run(cell):
        iR, ie, R, eps, zw, zs, ref_sets = cell
        rng = np.random.default_rng([cfg.seed, iR, ie])
        pw, ps = perturb_zero_set(zw, eps, rng), perturb_zero_set(zs, eps, rng)
        params = _params(cfg, R, eps)
        res = reconstruct_antiderivative(pw, ps, ref, params, reference_zero_sets=ref_sets)
        measured = res.error_against(_truth(q, ref, res.x))
        predicted = params.predicted_bound()
        log.info("R=%g eps=%g measured=%.3e predicted=%.3e", R, eps, measured, predicted)
        return (R, eps, measured, predicted, measured / predicted)

    with ThreadPoolExecutor(max_workers=_pool_size()) as pool:
        return list(pool.map(run, cells))


def cmd_stability_sweep(cfg: RunConfig) -> list[Path]:
    rows = sweep_rows(cfg)
    text = _csv_text(["R", "epsilon", "measured", "predicted", "ratio"], rows)
    return _commit(cfg.output_dir, {"sweep.csv": text})


def cmd_zero_potential(cfg: RunConfig) -> list[Path]:
    q = load_potential(cfg.potential_path)
    zw = _zeros_w(q, cfg.R)
    rng = np.random.default_rng(cfg.seed)
    zw = perturb_zero_set(zw, cfg.epsilon, rng)
    res = zero_potential_pipeline(zw, _params(cfg, cfg.R, cfg.epsilon), strict=not cfg.relaxed)
    return _commit(cfg.output_dir, _recon_files(res, _truth(q, None, res.x)))


HANDLERS = {"forward": cmd_forward, "find-zeros": cmd_find_zeros, "reconstruct": cmd_reconstruct,
            "stability-sweep": cmd_stability_sweep, "zero-potential": cmd_zero_potential}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = sys.argv[1:] if argv is None else list(argv)
    if "-v" in args or "--verbose" in args:
        log.setLevel(logging.INFO)
    try:
        cfg = parse_config(args)
        paths = HANDLERS[cfg.command](cfg)
    except ResolabError as exc:
        print(f"resolab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
