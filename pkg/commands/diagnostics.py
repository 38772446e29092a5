"""
Comandos de diagnóstico: bounds, certify, tailcheck
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from commands.experiments import solver_options, support_threshold
from components.experiments import write_meta
from components.experiments.runner import BASE_FIXED, resolve_lambda
from components.lifted_lasso import (
    BasisKind,
    BoundInputs,
    DomainError,
    InstanceParams,
    error_bound,
    gamma_zero,
    gen_instance,
    lambda_k_range,
    lambda_lower_bound,
    sample_complexity_bound,
    save_instance,
    solve_group_lasso,
    support_metrics,
    tail_bound_check,
    trial_rng,
    witness_certificate,
)
from components.lifted_lasso.synth_metrics import make_basis

logger = logging.getLogger(__name__)

DEFAULT_TAIL_TRIALS = 100_000
DEFAULT_ALPHAS = (1.5, 2.0, 3.0)
DEFAULT_K = 3.0
DEFAULT_GAMMA = 0.02


def problem_setting(config: Dict[str, Any]) -> Dict[str, Any]:
    """Parámetros del problema con la configuración base de las simulaciones como respaldo"""
    setting = {key: config.get(key) if config.get(key) is not None else default
               for key, default in BASE_FIXED.items()}
    setting["k"] = config.get("k") if config.get("k") is not None else DEFAULT_K
    setting["gamma"] = config.get("gamma")
    setting["lambda"] = config.get("lambda")
    return setting


def _print_table(df: pd.DataFrame) -> None:
    print(df.to_string(index=False))


def bounds(config: Dict[str, Any]) -> int:
    s = problem_setting(config)
    basis = make_basis(BasisKind(s["basis"]), s["N"], s["K"], trial_rng(config["seed"]))
    b = BoundInputs(N=s["N"], M=s["M"], K=s["K"], J=s["J"], sigma=s["sigma"], mu_max=basis.mu_max)
    g0 = gamma_zero(b)
    rows = [
        ("mu_max", basis.mu_max),
        ("gamma_zero", g0),
        ("lambda_lower_bound", lambda_lower_bound(b)),
        ("sample_complexity_bound", sample_complexity_bound(b)),
    ]
    if s["lambda"] is not None or g0 > 0:
        lam = resolve_lambda(s, basis.mu_max)
        rows += [("lambda", lam), ("error_bound", error_bound(b, lam))]
    else:
        logger.warning("⚠️ Sin ruido γ₀ = 0: indique --lambda para la cota de error")
    gamma = s["gamma"] if s["gamma"] is not None else DEFAULT_GAMMA
    try:
        k_low, k_high = lambda_k_range(b, gamma)
        rows += [("gamma", gamma), ("k_min", k_low), ("k_max", k_high)]
    except DomainError as e:
        logger.warning("⚠️ Sin intervalo de k: %s", e)
    _print_table(pd.DataFrame(rows, columns=["cantidad", "valor"]))
    logger.info("ℹ️ Constantes C_α = 1: los valores indican escalamiento, no umbrales absolutos")
    return 0


def _gamma_target(s: Dict[str, Any]) -> Optional[float]:
    """γ pedido, o el de referencia; sin ruido γ₀ = 0 y no hay γ que fijar"""
    if s["gamma"] is not None:
        return s["gamma"]
    return DEFAULT_GAMMA if s["sigma"] > 0 else None


def certify(config: Dict[str, Any]) -> int:
    s = problem_setting(config)
    params = InstanceParams(N=s["N"], M=s["M"], K=s["K"], J=s["J"], sigma=s["sigma"], basis_kind=s["basis"],
                            gamma_target=_gamma_target(s), seed=config["seed"])
    instance = gen_instance(params)
    lam = resolve_lambda(s, instance.op.basis.mu_max)
    opts = solver_options(config)
    report = witness_certificate(instance.op, instance.support, instance.X0_T, instance.noise, lam, opts)
    solution = solve_group_lasso(instance.op, instance.y, lam, opts)
    metrics = support_metrics(solution.estimate, instance.X0, instance.support, support_threshold(config))

    rows = [
        ("lambda", lam),
        ("support", " ".join(str(j) for j in instance.support)),
        ("gram_min_eig", report.gram_min_eig),
        ("isometry_residual", report.isometry_residual),
        ("max_off_support_norm", report.max_off_support_norm),
        ("route_gap", report.route_gap),
        ("phi_T_noise_l2inf", report.phi_T_noise_l2inf),
        ("certified", report.certified),
        ("solver_support", " ".join(str(j) for j in metrics.recovered_support)),
        ("solver_support_in_T", set(metrics.recovered_support) <= set(metrics.true_support)),
        ("exact_recovery", metrics.exact),
        ("l2inf_error", metrics.l2inf_error),
        ("kkt_residual", solution.kkt_residual),
    ]
    _print_table(pd.DataFrame(rows, columns=["cantidad", "valor"]))
    if report.certified:
        logger.info("✅ Certificado válido: ‖s_Tc‖_2,∞ = %.4f < 1", report.max_off_support_norm)
    else:
        logger.info("❌ Sin certificado (‖s_Tc‖_2,∞ = %.4f)", report.max_off_support_norm)
    if config["dump_failures"] and not (report.certified and metrics.exact):
        out = Path(config["dump_failures"])
        out.mkdir(parents=True, exist_ok=True)
        path = save_instance(instance, out / f"certify_seed{config['seed']}.llinst")
        logger.info("💾 Instancia guardada en %s", path)
    return 0


def tailcheck(config: Dict[str, Any]) -> int:
    s = problem_setting(config)
    trials = config["trials"] or DEFAULT_TAIL_TRIALS
    alphas = config["alpha"] or list(DEFAULT_ALPHAS)
    rows = []
    for alpha in alphas:
        for complex_input in (False, True):
            rate, bound = tail_bound_check(s["K"], s["N"], s["sigma"], alpha, trials, complex_input=complex_input,
                                           rng_seed=config["seed"], sharp=bool(config["sharp"]))
            slack = 3.0 * math.sqrt(bound * (1.0 - bound) / trials)
            rows.append(dict(alpha=alpha, branch="complex" if complex_input else "real", rate=rate, bound=bound,
                             within=rate <= bound + slack))
    df = pd.DataFrame(rows)
    _print_table(df)
    out = Path(config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    df.to_csv(out / "tailcheck.csv", index=False, lineterminator="\n")
    write_meta(out / "tailcheck.meta.json",
               {"K": s["K"], "N": s["N"], "sigma": s["sigma"], "trials": trials, "seed": config["seed"],
                "sharp": bool(config["sharp"])}, config["timezone"])
    status = "✅" if bool(np.all(df["within"])) else "⚠️"
    logger.info("%s Tasas empíricas dentro de e^(−α) + 3 errores estándar: %d/%d", status,
                int(df["within"].sum()), len(df))
    return 0


HANDLERS = {"bounds": bounds, "certify": certify, "tailcheck": tailcheck}


def run(command: str, config: Dict[str, Any]) -> int:
    return HANDLERS[command](config)
