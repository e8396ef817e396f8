"""Command-line interface.

Subcommands: ``gen-data``, ``fit``, ``eval``, ``sweep``, ``denoise`` and
``embed``. Settings come from built-in defaults, then an optional
``--config`` file of ``key=value`` lines, then explicit flags.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
4 numerical contract failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data, evaluation, model
from .errors import ConfigError, DataIOError, IpSaeError, NumericalError

log = logging.getLogger("ipsae")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


# -- configuration ------------------------------------------------------------------

def parse_key_values(text: str, source: str) -> dict[str, str]:
    """Parse ``key=value`` pairs separated by newlines or commas; ``#`` comments."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for part in line.split(",") if "=" in line and line.count("=") > 1 else [line]:
            key, sep, value = part.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"{source}:{lineno}: expected key=value, got {part!r}")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def synthetic_config(source: str | None, seed: int | None = None) -> data.SyntheticConfig:
    """Build a :class:`SyntheticConfig` from a file path, inline pairs or ``default``."""
    values = {}
    if source and source != "default":
        path = Path(source)
        if path.is_file():
            try:
                values = parse_key_values(path.read_text(encoding="utf-8"), str(path))
            except OSError as exc:
                raise DataIOError(f"cannot read {path}: {exc}") from exc
        else:
            values = parse_key_values(source, "--synthetic")
    fields = {f.name: f.type for f in dataclasses.fields(data.SyntheticConfig)}
    kwargs = {}
    for key, raw in values.items():
        if key == "density":
            key = "attribute_density"
        if key not in fields:
            raise ConfigError(f"unknown synthetic key {key!r}")
        try:
            kwargs[key] = raw if key == "name" else (
                float(raw) if key in ("noise_sigma", "attribute_density") else int(raw))
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    if seed is not None:
        kwargs["seed"] = seed
    return data.SyntheticConfig(**kwargs)


@dataclass
class RunConfig:
    dataset_path: str | None = None
    synthetic: str | None = None
    lam: float = 1.0
    space_mode: str = "enriched"
    classify_mode: str = "candidate"
    protocol: str = "zsl"
    seen_fraction: float = 0.2
    seed: int = 0
    output_path: str | None = None
    normalize: bool = False

    def validate(self) -> None:
        if (self.dataset_path is None) == (self.synthetic is None):
            raise ConfigError("give exactly one of --dataset or --synthetic")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.space_mode not in ("enriched", "original"):
            raise ConfigError(f"bad space mode {self.space_mode!r}")
        if self.protocol not in ("zsl", "gzsl"):
            raise ConfigError(f"bad protocol {self.protocol!r}")
        try:
            evaluation.ClassifyMode.parse(self.classify_mode)
        except ValueError:
            raise ConfigError(f"bad classify mode {self.classify_mode!r}") from None
        if not 0 < self.seen_fraction < 1:
            raise ConfigError("seen fraction must be in (0, 1)")

    def load_dataset(self) -> data.ZslDataset:
        if self.dataset_path is not None:
            ds = data.load_dataset(self.dataset_path)
        else:
            ds = data.generate_synthetic(synthetic_config(self.synthetic))
        return data.normalize_features(ds) if self.normalize else ds

    def train_indices(self, ds: data.ZslDataset) -> np.ndarray:
        if self.protocol == "gzsl":
            return self.split(ds).train_indices
        return ds.indices_of(ds.seen_classes)

    def split(self, ds: data.ZslDataset) -> data.GzslSplit:
        return data.split_gzsl(ds, self.seen_fraction, self.seed)


# config-file key -> (RunConfig field, converter)
_RUN_KEYS = {
    "dataset": ("dataset_path", str),
    "synthetic": ("synthetic", str),
    "lambda": ("lam", float),
    "space": ("space_mode", str),
    "mode": ("classify_mode", str),
    "protocol": ("protocol", str),
    "seen_fraction": ("seen_fraction", float),
    "seed": ("seed", int),
    "out": ("output_path", str),
    "normalize": ("normalize", lambda v: v.lower() in ("1", "true", "yes", "on")),
}


def run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot read config {args.config}: {exc}") from exc
        for key, raw in parse_key_values(text, args.config).items():
            if key in ("grid", "model"):
                continue
            if key not in _RUN_KEYS:
                raise ConfigError(f"{args.config}: unknown key {key!r}")
            attr, conv = _RUN_KEYS[key]
            try:
                setattr(cfg, attr, conv(raw))
            except ValueError:
                raise ConfigError(f"{args.config}: bad value for {key}: {raw!r}") from None
    for key, (attr, _) in _RUN_KEYS.items():
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, attr, value)
    if cfg.dataset_path is not None and getattr(args, "synthetic", None) is not None:
        cfg.dataset_path = None
    if cfg.synthetic is not None and getattr(args, "dataset", None) is not None:
        cfg.synthetic = None
    cfg.validate()
    return cfg


def config_value(args, key: str) -> str | None:
    """A raw value from the flags or, failing that, the ``--config`` file."""
    value = getattr(args, key, None)
    if value is None and getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot read config {args.config}: {exc}") from exc
        value = parse_key_values(text, args.config).get(key)
    return value


def _out_dir(cfg: RunConfig, default: str) -> Path:
    out = Path(cfg.output_path or default)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create {out}: {exc}") from exc
    return out


def _write_json(path: Path, doc: dict) -> None:
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


# -- commands -----------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    seed = args.seed if args.seed is not None else None
    cfg = synthetic_config(args.synthetic, seed)
    ds = data.generate_synthetic(cfg)
    data.save_dataset(ds, args.out, binary=args.format == "bin")
    print(f"d={ds.d} k={ds.k} C={ds.n_classes} n={ds.n}")
    return EXIT_OK


def _fit(cfg: RunConfig, ds: data.ZslDataset) -> model.IpSaeModel:
    fitted = model.fit(ds, cfg.train_indices(ds), cfg.lam, cfg.space_mode)
    log.info("fit: nullified_modes=%d residual=%.3e", fitted.nullified_modes, fitted.residual)
    return fitted


def cmd_fit(args) -> int:
    cfg = run_config(args)
    ds = cfg.load_dataset()
    fitted = _fit(cfg, ds)
    out = _out_dir(cfg, "run")
    model.save_model(fitted, out / "model.bin")
    S = data.sample_attributes_for(ds, cfg.train_indices(ds))
    hub = model.hubness_bound(S, cfg.lam)
    _write_json(out / "fit.json", {
        "lambda": cfg.lam, "space_mode": fitted.space_mode.value, "protocol": cfg.protocol,
        "d": fitted.d, "k": fitted.k, "m": fitted.m, **fitted.diagnostics(),
        "hubness_bound": hub["bound"], "hubness_lhs": hub["lhs"], "alpha": hub["alpha"],
    })
    print(f"k={fitted.k} m={fitted.m} nullified_modes={fitted.nullified_modes} "
          f"residual={fitted.residual:.3e}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = run_config(args)
    ds = cfg.load_dataset()
    model_path = config_value(args, "model")
    if model_path:
        fitted = model.load_model(model_path)
        diag = {"nullified_modes": None, "residual": None}
        fit_json = Path(model_path).with_name("fit.json")
        if fit_json.is_file():
            saved = json.loads(fit_json.read_text(encoding="utf-8"))
            diag = {k: saved.get(k) for k in ("nullified_modes", "residual")}
    else:
        fitted = _fit(cfg, ds)
        diag = {"nullified_modes": fitted.nullified_modes, "residual": fitted.residual}
    if fitted.d != ds.d or fitted.k != ds.k:
        raise ConfigError(f"model dimensions d={fitted.d}, k={fitted.k} do not match "
                          f"dataset d={ds.d}, k={ds.k}")
    mode = evaluation.ClassifyMode.parse(cfg.classify_mode)
    S = data.sample_attributes_for(ds, cfg.train_indices(ds))
    diag["hubness_bound"] = model.hubness_bound(S, fitted.lam)["bound"]
    if cfg.protocol == "zsl":
        report = evaluation.run_zsl(fitted, ds, mode)
        confusion = report.confusion
        last = f"mean_per_class_accuracy={report.mean_per_class_accuracy:.4f}"
    else:
        report = evaluation.run_gzsl(fitted, ds, cfg.split(ds), mode)
        confusion = report.overall.confusion
        last = (f"mean_per_class_accuracy={report.overall.mean_per_class_accuracy:.4f} "
                f"acc_seen={report.acc_seen:.4f} acc_unseen={report.acc_unseen:.4f} "
                f"harmonic_mean={report.harmonic_mean:.4f}")
    out = _out_dir(cfg, "run")
    doc = evaluation.report_document(report, protocol=cfg.protocol, mode=mode,
                                     lam=fitted.lam, diagnostics=diag)
    _write_json(out / "report.json", doc)
    try:
        evaluation.write_confusion_csv(out / "confusion.csv", confusion)
    except OSError as exc:
        raise DataIOError(f"cannot write confusion.csv: {exc}") from exc
    print(last)
    return EXIT_OK


def parse_grid(text: str) -> list[float]:
    try:
        grid = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad lambda grid {text!r}") from None
    if not grid or any(not g > 0 for g in grid):
        raise ConfigError("lambda grid must be a non-empty list of positive numbers")
    return grid


def cmd_sweep(args) -> int:
    cfg = run_config(args)
    grid_text = config_value(args, "grid")
    if not grid_text:
        raise ConfigError("--grid is required")
    grid = parse_grid(grid_text)
    ds = cfg.load_dataset()
    rows = evaluation.lambda_sweep(ds, cfg.train_indices(ds), grid,
                                   evaluation.ClassifyMode.parse(cfg.classify_mode),
                                   cfg.space_mode)
    lines = evaluation.sweep_csv_lines(rows)
    if cfg.output_path:
        try:
            Path(cfg.output_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot write {cfg.output_path}: {exc}") from exc
    print("\n".join(lines))
    best = max(rows, key=lambda r: r.accuracy)
    print(f"best_lambda={best.lam!r} accuracy={best.accuracy:.4f}")
    return EXIT_OK


def _read_any_matrix(path: str) -> np.ndarray:
    p = Path(path)
    return data.read_matrix_bin(p) if p.suffix == ".bin" else data.read_matrix_csv(p)


def cmd_denoise(args) -> int:
    if not 0 < args.threshold <= 1:
        raise ConfigError(f"threshold must be in (0, 1], got {args.threshold}")
    raw = _read_any_matrix(args.raw)
    labels = data.read_labels(args.labels)
    keep = [int(t) for t in args.keep.split(",")] if args.keep else None
    binary, kept = data.denoise_attributes(raw, labels, args.threshold, keep=keep)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        data.write_matrix_csv(out / "class_attributes.csv", binary)
        data.write_matrix_csv(out / "attributes.csv", binary[kept])
        (out / "kept.csv").write_text("".join(f"{i}\n" for i in kept), encoding="utf-8")
    except OSError as exc:
        if isinstance(exc, DataIOError):
            raise
        raise DataIOError(f"cannot write to {out}: {exc}") from exc
    print(f"attributes={binary.shape[0]} classes={binary.shape[1]} kept={len(kept)}")
    return EXIT_OK


def cmd_embed(args) -> int:
    """Dump unseen-sample coordinates (input space and reconstruction) for plotting."""
    cfg = run_config(args)
    ds = cfg.load_dataset()
    model_path = config_value(args, "model")
    fitted = model.load_model(model_path) if model_path else _fit(cfg, ds)
    if fitted.d != ds.d or fitted.k != ds.k:
        raise ConfigError("model dimensions do not match the dataset")
    idx = ds.indices_of(ds.unseen_classes)
    Xp = model.input_space(ds, idx, fitted.space_mode)
    recon = model.decode(fitted, model.encode(fitted, Xp))
    labels = ds.labels[idx]
    out = _out_dir(cfg, "run")
    try:
        with open(out / "embedding.csv", "w", encoding="utf-8") as fh:
            fh.write("space,label," + ",".join(f"x{i}" for i in range(Xp.shape[0])) + "\n")
            for name, pts in (("input", Xp), ("reconstructed", recon)):
                for j, c in enumerate(labels):
                    fh.write(f"{name},{c}," + ",".join(repr(float(v)) for v in pts[:, j]) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write embedding.csv: {exc}") from exc
    s_in = evaluation.silhouette_score(Xp, labels)["mean"]
    s_rec = evaluation.silhouette_score(recon, labels)["mean"]
    print(f"silhouette_input={s_in:.4f} silhouette_reconstructed={s_rec:.4f}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def _run_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", metavar="DIR", help="dataset directory")
    src.add_argument("--synthetic", metavar="CFG",
                     help="synthetic config: key=value file, inline 'd=32,k=12' or 'default'")
    p.add_argument("--config", metavar="FILE", help="key=value run configuration")
    p.add_argument("--lambda", dest="lambda", type=float, metavar="F")
    p.add_argument("--space", choices=["enriched", "original"])
    p.add_argument("--mode", choices=["oracle", "candidate", "visual"])
    p.add_argument("--protocol", choices=["zsl", "gzsl"])
    p.add_argument("--seen-fraction", dest="seen_fraction", type=float, metavar="F")
    p.add_argument("--seed", type=int, metavar="N", help="GZSL split seed")
    p.add_argument("--normalize", action="store_const", const=True, default=None,
                   help="scale every feature column to unit L2 norm")
    p.add_argument("--out", metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipsae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset directory")
    p.add_argument("--synthetic", metavar="CFG", default="default")
    p.add_argument("--seed", type=int, help="override the synthetic seed")
    p.add_argument("--format", choices=["bin", "csv"], default="bin")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("fit", help="fit W and write model.bin + fit.json")
    _run_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate with the ZSL or GZSL protocol")
    _run_flags(p)
    p.add_argument("--model", metavar="PATH", help="model.bin (fits afresh when omitted)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="accuracy over a lambda grid")
    _run_flags(p)
    p.add_argument("--grid", metavar="L1,L2,...")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("denoise", help="binarise per-image attributes per class")
    p.add_argument("--raw", required=True, metavar="PATH", help="a x n matrix (.csv or .bin)")
    p.add_argument("--labels", required=True, metavar="PATH")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--keep", metavar="I,J,...", help="explicit attribute indices to keep")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("embed", help="write unseen-sample coordinates for external plotting")
    _run_flags(p)
    p.add_argument("--model", metavar="PATH")
    p.set_defaults(func=cmd_embed)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("IPSAE_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataIOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IpSaeError as exc:  # pragma: no cover - every subclass is handled above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
