"""
Comandos de microscopía: smi-psf, smi-synth, smi-recover
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from commands.experiments import solver_options  # noqa: E402
from components.experiments import write_meta, write_styled_excel  # noqa: E402
from components.lifted_lasso import ConfigError, SampleMode, ShapeError  # noqa: E402
from components.smi import (  # noqa: E402
    PsfBank,
    PsfSubspace,
    localization_table,
    psf_bank,
    psf_subspace,
    random_truth,
    read_fstack,
    recover_stack,
    smi_operator,
    superimpose,
    synth_stack,
    write_fstack,
    write_pgm,
    write_png,
)

logger = logging.getLogger(__name__)

DEFAULT_SYNTH_SNR_DB = 20.0
DEFAULT_RATIO = 0.3
DEFAULT_LOCALIZATION_THRESHOLD = 0.1
DEFAULT_MERGE_RADIUS = 2


def _bank(config: Dict[str, Any]) -> PsfBank:
    return psf_bank(count=config["psf_count"], width_range=(config["width_min"], config["width_max"]))


def _subspace(config: Dict[str, Any]) -> Tuple[PsfBank, PsfSubspace]:
    bank = _bank(config)
    sub = psf_subspace(bank, config["psf_k"])
    logger.info("🔎 Banco de %d PSF (%d×%d), K=%d retiene %.4f de la energía", bank.count, bank.size, bank.size,
                sub.K, sub.energy_ratio_k)
    return bank, sub


def _out_dir(config: Dict[str, Any]) -> Path:
    out = Path(config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _montage(images: np.ndarray, titles: List[str], path: Path, cmap: str) -> Path:
    fig, axes = plt.subplots(1, len(images), figsize=(2.2 * len(images), 2.4), squeeze=False)
    for ax, image, title in zip(axes[0], images, titles):
        ax.imshow(image, cmap=cmap, interpolation="nearest")
        ax.set_title(title, fontsize=8)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def psf(config: Dict[str, Any]) -> int:
    bank, sub = _subspace(config)
    out = _out_dir(config)
    energy = sub.singular_values ** 2
    spectrum = pd.DataFrame({
        "index": np.arange(1, energy.size + 1),
        "singular_value": sub.singular_values,
        "energy_ratio": np.cumsum(energy) / energy.sum(),
    })
    paths = [out / "psf_spectrum.csv"]
    spectrum.to_csv(paths[0], index=False, lineterminator="\n")
    if config["format"] == "xlsx":
        paths.append(write_styled_excel(spectrum, out / "psf_spectrum.xlsx", sheet_name="espectro"))
    paths.append(_montage(bank.psfs, [f"w={w:.2f}" for w in bank.widths], out / "psf_bank.png", "viridis"))
    basis = [sub.basis_spatial[:, k].reshape(sub.size, sub.size) for k in range(sub.K)]
    paths.append(_montage(np.stack(basis), [f"b{k}" for k in range(sub.K)], out / "psf_basis.png", "RdBu_r"))
    paths.append(write_meta(out / "psf.meta.json", {
        "widths": list(bank.widths), "size": bank.size, "K": sub.K, "energy_ratio_k": sub.energy_ratio_k,
    }, config["timezone"]))
    for path in paths:
        logger.info("✅ %s", path)
    return 0


def synth(config: Dict[str, Any]) -> int:
    bank, sub = _subspace(config)
    n, factor = config["frame_side"], config["factor"]
    sigma = config["sigma"]
    snr_db = None
    if sigma is None:
        snr_db = DEFAULT_SYNTH_SNR_DB if config["snr_db"] is None else config["snr_db"]
    truth = random_truth(config["frames"], n, factor, max_per_frame=config["j_max"], width_range=bank.width_range,
                         margin=sub.size // 2, seed=config["seed"])
    stack, truth_df = synth_stack(truth, sub, n, factor, sigma=sigma or 0.0, seed=config["seed"],
                                  mode=SampleMode(config["sample_mode"]), max_per_frame=max(config["j_max"], 1),
                                  snr_db=snr_db)
    if config["subtract_mean"]:
        stack = stack.subtract_mean()
    out = _out_dir(config)
    paths = [write_fstack(stack, out / "stack.fstack")]
    truth_df.to_csv(out / "truth.csv", index=False, lineterminator="\n")
    paths.append(out / "truth.csv")
    paths.append(write_meta(_sidecar(out / "stack.fstack"), {
        "synthetic": True, "frames": stack.count, "frame_side": n, "factor": factor, "sigma": config["sigma"],
        "snr_db": snr_db, "seed": config["seed"], "sample_mode": config["sample_mode"],
        "psf_widths": list(bank.widths), "psf_k": sub.K, "mean_subtracted": stack.mean_subtracted,
        "pixel_pitch_nm": stack.pixel_pitch_nm,
    }, config["timezone"]))
    logger.info("🧪 %d cuadros, %d fuentes en total", stack.count, len(truth_df))
    for path in paths:
        logger.info("✅ %s", path)
    return 0


def _sidecar(stack_path: Path) -> Path:
    return stack_path.with_suffix(".meta.json")


def _is_synthetic(stack_path: Path) -> bool:
    """La pila viene de smi-synth si su sidecar lo declara"""
    sidecar = _sidecar(stack_path)
    if not sidecar.is_file():
        return False
    try:
        return bool(json.loads(sidecar.read_text(encoding="utf-8")).get("synthetic", False))
    except (ValueError, AttributeError):
        logger.warning("⚠️ Sidecar ilegible: %s", sidecar)
        return False


def recover(config: Dict[str, Any]) -> int:
    if not config["input"]:
        raise ConfigError("smi-recover requiere una pila de entrada", key="input")
    stack_path = Path(config["input"])
    stack = read_fstack(stack_path, highres_factor=config["factor"])
    if stack.count == 0:
        raise ShapeError("La pila no tiene cuadros")
    height, width = stack.frame_shape
    if height != width:
        raise ShapeError(f"Se requieren cuadros cuadrados, se recibió {height}×{width}")
    # por defecto se resta la media a datos ingeridos, no a pilas sintéticas
    subtract = config["subtract_mean"]
    if subtract is None:
        subtract = not _is_synthetic(stack_path)
    if subtract:
        stack = stack.subtract_mean()

    _, sub = _subspace(config)
    op = smi_operator(sub, height, config["factor"], SampleMode(config["sample_mode"]))
    lam = config["lambda"]
    ratio = config["ratio"] if lam is None else None
    if lam is None and ratio is None:
        ratio = DEFAULT_RATIO
    opts = solver_options(config, default_mode="bb-nonmonotone")
    threshold = DEFAULT_LOCALIZATION_THRESHOLD if config["support_threshold"] is None else config["support_threshold"]
    setting = f"λ={lam:g}" if lam is not None else f"ratio={ratio:g}"
    logger.info("🔬 Recuperando %d cuadros (%s)", stack.count, setting)
    recoveries = recover_stack(stack, op, lam=lam, ratio=ratio, opts=opts,
                               rel_threshold=threshold, workers=config["workers"])
    not_converged = sum(not r.converged for r in recoveries)
    if not_converged:
        logger.warning("⚠️ %d cuadro(s) sin converger", not_converged)

    image = superimpose(recoveries, stack.highres_pitch_nm)
    out = _out_dir(config)
    paths = [write_pgm(image, out / "highres.pgm")]
    if config["format"] in ("plot", "both"):
        paths.append(write_png(image, out / "highres.png"))
    merge_radius = DEFAULT_MERGE_RADIUS if config["merge_radius"] is None else config["merge_radius"]
    table = localization_table(recoveries, stack.highres_pitch_nm, merge_radius)
    table.to_csv(out / "localizations.csv", index=False, lineterminator="\n")
    paths.append(out / "localizations.csv")
    if config["format"] == "xlsx":
        paths.append(write_styled_excel(table, out / "localizations.xlsx", sheet_name="localizaciones"))
    paths.append(write_meta(out / "highres.meta.json", {
        "input": str(config["input"]), "frames": stack.count, "factor": config["factor"],
        "sample_mode": config["sample_mode"], "psf_k": sub.K, "lambda": lam, "ratio": ratio,
        "support_threshold": threshold, "merge_radius": merge_radius,
        "mean_subtracted": stack.mean_subtracted, "pixel_pitch_nm": image.pixel_pitch_nm,
        "frame_lambdas": [r.lam for r in recoveries], "frame_residuals": [r.residual_norm for r in recoveries],
    }, config["timezone"]))
    logger.info("📍 %d localizaciones en %d cuadros", len(table), stack.count)
    for path in paths:
        logger.info("✅ %s", path)
    return 0


HANDLERS = {"smi-psf": psf, "smi-synth": synth, "smi-recover": recover}


def run(command: str, config: Dict[str, Any]) -> int:
    return HANDLERS[command](config)
