"""Command-line front end.

Subcommands::

    quatcomplete inpaint IMAGE --mr 0.5 --variant qfnn --out DIR
    quatcomplete synth --rows 100 --cols 100 --rank 5 --mr 0.5
    quatcomplete bench IMG [IMG ...] --mrs 0.5 0.7 --variants qdfn qfnn --out DIR
    quatcomplete replay DIR/manifest.ini

``inpaint`` and ``bench`` write a ``manifest.ini`` next to their outputs;
``replay`` re-runs it.  Exit codes: 0 when every run reached the tolerance,
1 when a run failed or stopped at the iteration cap, 2 on bad usage.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, QuaternionError
from .imaging import (MaskSpec, apply_mask, image_to_qmatrix, psnr, qmatrix_to_image,
                      random_mask, read_png, ssim, write_png)
from .norms import NormVariant
from .quaternion import ObservationMask, QMatrix
from .solvers import SolverConfig, solve

log = logging.getLogger("quatcomplete")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
CSV_HEADER = ("image", "mr", "variant", "psnr", "ssim", "iters", "final_rank", "seconds")
VARIANTS = tuple(v.value for v in NormVariant)
DEFAULT_D0 = 40


class UsageError(Exception):
    pass


# -- manifest -------------------------------------------------------------

_AUTO = "auto"


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce an ``inpaint`` or ``bench`` run."""

    command: str
    inputs: tuple[str, ...]
    variants: tuple[str, ...]
    mrs: tuple[float, ...]
    seed: int = 0
    config: SolverConfig = field(default_factory=SolverConfig)
    out: str = "."
    mask: str = ""
    jobs: int = 1

    def __post_init__(self):
        if self.command not in ("inpaint", "bench"):
            raise UsageError(f"unknown manifest command {self.command!r}")
        if not self.inputs:
            raise UsageError("manifest lists no input images")
        try:
            for v in self.variants:
                NormVariant.parse(v)
            for mr in self.mrs:
                MaskSpec(mr)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if self.command == "inpaint" and (len(self.inputs), len(self.variants), len(self.mrs)) != (1, 1, 1):
            raise UsageError("an inpaint manifest takes one image, one variant and one MR")
        if self.jobs < 1:
            raise UsageError("jobs must be at least 1")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {
            "command": self.command,
            "inputs": "\n".join(self.inputs),
            "variants": " ".join(self.variants),
            "mrs": " ".join(repr(float(m)) for m in self.mrs),
            "seed": str(self.seed),
            "out": self.out,
            "mask": self.mask,
            "jobs": str(self.jobs),
        }
        solver = {}
        for name, value in self.config.to_dict().items():
            if name == "seed":
                continue  # the run seed drives the solver too
            solver[name] = _AUTO if value is None else repr(value)
        cp["solver"] = solver
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunManifest":
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        try:
            run, solver = cp["run"], cp["solver"]
        except KeyError as exc:
            raise UsageError(f"manifest is missing section {exc}") from None
        seed = int(run.get("seed", "0"))
        settings = {"seed": seed}
        int_fields = {f.name for f in dataclasses.fields(SolverConfig) if f.type in ("int", int)}
        for name, raw in solver.items():
            if raw == _AUTO:
                settings[name] = None
            elif name in int_fields:
                settings[name] = int(raw)
            else:
                settings[name] = float(raw)
        return cls(
            command=run["command"],
            inputs=tuple(line for line in run["inputs"].splitlines() if line.strip()),
            variants=tuple(run["variants"].split()),
            mrs=tuple(float(m) for m in run["mrs"].split()),
            seed=seed,
            config=SolverConfig.from_dict(settings),
            out=run.get("out", "."),
            mask=run.get("mask", ""),
            jobs=int(run.get("jobs", "1")),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_ini(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls.from_ini(Path(path).read_text(encoding="utf-8"))


# -- helpers --------------------------------------------------------------

def _json_number(x: float):
    # JSON has no infinity; a perfect reconstruction reports "inf"
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _fit_config(cfg: SolverConfig, shape) -> SolverConfig:
    # d0 larger than the smaller side is infeasible; cap it
    cap = min(shape)
    if cfg.d0 > cap:
        log.info("capping d0 from %d to %d for a %dx%d input", cfg.d0, cap, *shape)
        cfg = dataclasses.replace(cfg, d0=cap)
    return cfg


def _progress(iteration, re, d, mu):
    if iteration % 25 == 0:
        log.info("iter %4d  RE %.3e  d %3d  mu %.3e", iteration, re, d, mu)


def _complete_image(img: np.ndarray, mask: ObservationMask, variant: str, cfg: SolverConfig):
    t = mask.project(image_to_qmatrix(img))
    res = solve(t, mask, _fit_config(cfg, img.shape[:2]), variant, callback=_progress)
    return res, qmatrix_to_image(res.X_hat)


# -- inpaint --------------------------------------------------------------

def run_inpaint(manifest: RunManifest) -> int:
    src = manifest.inputs[0]
    variant = manifest.variants[0]
    mr = manifest.mrs[0]
    img = read_png(src)
    h, w = img.shape[:2]
    if manifest.mask:
        mask = ObservationMask.load(manifest.mask)
        if mask.shape != (h, w):
            raise UsageError(f"mask shape {mask.shape} does not match image {h}x{w}")
    else:
        mask = random_mask(h, w, MaskSpec(mr, manifest.seed))
    observed = apply_mask(img, mask)
    res, completed = _complete_image(img, mask, variant, manifest.config)

    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    write_png(out / "observed.png", observed)
    write_png(out / "completed.png", completed)
    mask.save(out / "mask.txt")
    report = {
        "input": src,
        "variant": NormVariant.parse(variant).value,
        "mr": mr,
        "seed": manifest.seed,
        "psnr": _json_number(psnr(img, completed)),
        "ssim": ssim(img, completed),
        "observed_psnr": _json_number(psnr(img, observed)),
        "observed_ssim": ssim(img, observed),
        "iters": res.iters,
        "final_rank": res.final_rank,
        "rank_adjusted_at": res.rank_adjusted_at,
        "converged": res.converged,
        "elapsed_seconds": res.elapsed,
        "re_trace": list(res.re_trace),
    }
    (out / "report.json").write_text(_dump_json(report), encoding="utf-8")
    manifest.save(out / "manifest.ini")
    print(f"PSNR {report['psnr']} dB (observed {report['observed_psnr']} dB), "
          f"SSIM {report['ssim']:.4f}, {res.iters} iterations, rank {res.final_rank}; "
          f"wrote {out}")
    if not res.converged:
        print(f"error: relative error {res.final_re:.3e} did not reach tol "
              f"{res.config.tol:g} within {res.config.max_iters} iterations", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


# -- synth ----------------------------------------------------------------

def synthetic_problem(rows: int, cols: int, rank: int, mr: float, seed: int):
    """Seeded low-rank quaternion matrix and pixel mask."""
    if rank < 0 or rank > min(rows, cols):
        raise UsageError(f"rank must lie in [0, {min(rows, cols)}], got {rank}")
    rng = np.random.default_rng(seed)
    if rank == 0:
        x_true = QMatrix.zeros(rows, cols)
    else:
        x_true = QMatrix.random(rows, rank, rng) @ QMatrix.random(cols, rank, rng).H
    mask = random_mask(rows, cols, MaskSpec(mr, seed))
    return x_true, mask


def run_synth(rows, cols, rank, mr, variant, seed, cfg: SolverConfig) -> tuple[dict, bool]:
    x_true, mask = synthetic_problem(rows, cols, rank, mr, seed)
    res = solve(mask.project(x_true), mask, _fit_config(cfg, (rows, cols)), variant,
                callback=_progress)
    ref = x_true.norm()
    err = (res.X_hat - x_true).norm()
    report = {
        "rows": rows,
        "cols": cols,
        "true_rank": rank,
        "mr": mr,
        "variant": NormVariant.parse(variant).value,
        "seed": seed,
        "recovery_error": err / ref if ref > 0 else err,
        "iters": res.iters,
        "estimated_rank": res.final_rank,
        "final_re": res.final_re,
        "converged": res.converged,
        "elapsed_seconds": res.elapsed,
    }
    return report, res.converged


# -- bench ----------------------------------------------------------------

def _bench_cell(cell):
    image, mr, variant, seed, cfg = cell
    try:
        img = read_png(image)
        mask = random_mask(img.shape[0], img.shape[1], MaskSpec(mr, seed))
        res, completed = _complete_image(img, mask, variant, cfg)
    except (QuaternionError, ArithmeticError, OSError, ValueError) as exc:
        return {"image": image, "mr": mr, "variant": variant, "psnr": "", "ssim": "",
                "iters": "", "final_rank": "", "seconds": ""}, False, f"{type(exc).__name__}: {exc}"
    row = {
        "image": image,
        "mr": mr,
        "variant": variant,
        "psnr": f"{psnr(img, completed):.6f}",
        "ssim": f"{ssim(img, completed):.6f}",
        "iters": res.iters,
        "final_rank": res.final_rank,
        "seconds": f"{res.elapsed:.3f}",
    }
    return row, res.converged, None if res.converged else "did not reach tol"


def bench_cells(manifest: RunManifest):
    """Grid cells in report order: image, then MR, then variant."""
    return [(image, mr, NormVariant.parse(v).value, manifest.seed, manifest.config)
            for image in manifest.inputs for mr in manifest.mrs for v in manifest.variants]


def run_bench(manifest: RunManifest) -> int:
    cells = bench_cells(manifest)
    if manifest.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=manifest.jobs) as pool:
            results = list(pool.map(_bench_cell, cells))
    else:
        results = [_bench_cell(c) for c in cells]

    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        for row, _, _ in results:
            writer.writerow(row)
    manifest.save(out / "manifest.ini")
    failures = [(c, msg) for c, (_, ok, msg) in zip(cells, results) if not ok]
    for (image, mr, variant, _, _), msg in failures:
        print(f"error: {image} mr={mr} {variant}: {msg}", file=sys.stderr)
    print(f"wrote {len(results)} rows to {out / 'bench.csv'}")
    return EXIT_FAILURE if failures else EXIT_OK


# -- argument parsing -----------------------------------------------------

def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--seed", type=int, default=0, help="seed for the mask and the factor init")
    g.add_argument("--d0", type=int, default=DEFAULT_D0,
                   help="initial rank estimate, capped at min(H, W) (default %(default)s)")
    g.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="regularization weight (default 0.05*sqrt(max(H, W)))")
    g.add_argument("--mu0", type=float, default=None,
                   help="initial penalty (default 1e-3, or 1e-2 for qdnn)")
    g.add_argument("--mu-max", type=float, default=1e20)
    g.add_argument("--beta", type=float, default=1.03, help="penalty growth factor")
    g.add_argument("--tol", type=float, default=1e-4, help="relative error stopping tolerance")
    g.add_argument("--max-iters", type=int, default=500)
    g.add_argument("--rank-threshold", type=float, default=20.0,
                   help="drop ratio that triggers the one-time rank cut")
    g.add_argument("--rank-warmup", type=int, default=10,
                   help="iterations before the rank cut may trigger")


def _config_from(args) -> SolverConfig:
    return SolverConfig(lam=args.lam, mu0=args.mu0, mu_max=args.mu_max, beta=args.beta,
                        d0=args.d0, tol=args.tol, max_iters=args.max_iters,
                        rank_drop_threshold=args.rank_threshold,
                        rank_warmup=args.rank_warmup, seed=args.seed)


def _mr(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"missing ratio must lie in [0, 1], got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quatcomplete",
                                     description="Quaternion low-rank completion of color images.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inpaint", help="mask an image at random and complete it")
    p.add_argument("image", help="input PNG")
    p.add_argument("--variant", choices=VARIANTS, default="qfnn")
    p.add_argument("--mr", type=_mr, default=0.5, help="missing ratio of pixels")
    p.add_argument("--mask", default="", help="mask text file to use instead of a random mask")
    p.add_argument("--out", required=True, help="output directory")
    _solver_flags(p)

    p = sub.add_parser("synth", help="complete a seeded synthetic low-rank matrix")
    p.add_argument("--rows", type=int, default=100)
    p.add_argument("--cols", type=int, default=100)
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--variant", choices=VARIANTS, default="qdfn")
    p.add_argument("--mr", type=_mr, default=0.5)
    p.add_argument("--out", default="", help="also write the JSON report here")
    _solver_flags(p)

    p = sub.add_parser("bench", help="grid of images x missing ratios x variants to CSV")
    p.add_argument("images", nargs="+", help="input PNGs")
    p.add_argument("--mrs", type=_mr, nargs="+", default=[0.5, 0.7, 0.85])
    p.add_argument("--variants", choices=VARIANTS, nargs="+", default=list(VARIANTS))
    p.add_argument("--jobs", type=int, default=1, help="grid cells solved in parallel")
    p.add_argument("--out", required=True, help="output directory")
    _solver_flags(p)

    p = sub.add_parser("replay", help="re-run a saved manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the manifest's output directory")
    return parser


def _dispatch(args) -> int:
    if args.command == "replay":
        manifest = RunManifest.load(args.manifest)
        if args.out is not None:
            manifest = dataclasses.replace(manifest, out=args.out)
    elif args.command == "synth":
        report, ok = run_synth(args.rows, args.cols, args.rank, args.mr, args.variant,
                               args.seed, _config_from(args))
        text = _dump_json(report)
        sys.stdout.write(text)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        return EXIT_OK if ok else EXIT_FAILURE
    elif args.command == "inpaint":
        manifest = RunManifest("inpaint", (args.image,), (args.variant,), (args.mr,),
                               seed=args.seed, config=_config_from(args), out=args.out,
                               mask=args.mask)
    else:
        manifest = RunManifest("bench", tuple(args.images), tuple(args.variants), tuple(args.mrs),
                               seed=args.seed, config=_config_from(args), out=args.out,
                               jobs=args.jobs)
    return run_inpaint(manifest) if manifest.command == "inpaint" else run_bench(manifest)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (UsageError, ConfigError, configparser.Error) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuaternionError, ArithmeticError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
