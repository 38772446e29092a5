"""
Punto de entrada de la línea de comandos

    python main.py <comando> [opciones]

Los comandos y sus módulos están registrados en `AppConfig.COMMANDS`.
"""

import argparse
import importlib
import logging
import sys
from typing import Dict, List, Optional

from app_config import AppConfig, load_run_config, setup_logging
from components.lifted_lasso import LiftedLassoError

logger = logging.getLogger(__name__)

EXPERIMENT_COMMANDS = ("phase-lambda", "phase-nk", "phase-nj", "error-lambda", "error-j")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", dest="config_path", help="archivo de configuración clave = valor")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--workers", type=int, help="procesos del pool (-1 = todos los núcleos)")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--format", choices=AppConfig.CHOICES["format"])
    common.add_argument("--paper-scale", dest="paper_scale", action="store_const", const=True,
                        help="grillas y ensayos del protocolo completo")
    common.add_argument("--log-level", dest="log_level", choices=AppConfig.CHOICES["log_level"])
    common.add_argument("--timezone")
    return common


def _problem_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("problema")
    for name in ("N", "M", "K", "J"):
        group.add_argument(f"--{name}", dest=name, type=int)
    group.add_argument("--sigma", type=float)
    group.add_argument("--k", dest="k", type=float, help="λ = k·γ₀")
    group.add_argument("--gamma", type=float)
    group.add_argument("--lambda", dest="lambda", type=float)
    group.add_argument("--basis", choices=AppConfig.CHOICES["basis"])


def _solver_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("solver")
    group.add_argument("--max-iters", dest="max_iters", type=int)
    group.add_argument("--kkt-tol", dest="kkt_tol", type=float)
    group.add_argument("--step-mode", dest="step_mode", choices=AppConfig.CHOICES["step_mode"])
    group.add_argument("--support-threshold", dest="support_threshold", type=float)


def _microscopy_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("microscopía")
    group.add_argument("--input", help="pila FSTACK de entrada")
    group.add_argument("--frames", type=int)
    group.add_argument("--frame-side", dest="frame_side", type=int, help="lado n del cuadro de baja resolución")
    group.add_argument("--factor", type=int, help="factor de superresolución")
    group.add_argument("--sample-mode", dest="sample_mode", choices=AppConfig.CHOICES["sample_mode"])
    group.add_argument("--psf-count", dest="psf_count", type=int)
    group.add_argument("--psf-k", dest="psf_k", type=int)
    group.add_argument("--width-min", dest="width_min", type=float)
    group.add_argument("--width-max", dest="width_max", type=float)
    group.add_argument("--j-max", dest="j_max", type=int)
    group.add_argument("--ratio", type=float, help="λ = ratio·‖L*(y)‖_{2,∞} por cuadro")
    group.add_argument("--subtract-mean", dest="subtract_mean", action=argparse.BooleanOptionalAction)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liftlasso",
        description="Recuperación dispersa levantada por group lasso: experimentos, diagnósticos y microscopía",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="comando")
    common = _common_parser()
    for name, help_text in AppConfig.get_command_menu().items():
        sub = subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
        group = AppConfig.get_command_config(name)["group"]
        if group in ("experimentos", "diagnóstico"):
            _problem_arguments(sub)
            _solver_arguments(sub)
        if name in EXPERIMENT_COMMANDS or name == "certify":
            sub.add_argument("--dump-failures", dest="dump_failures", metavar="DIR",
                             help="guarda en DIR las instancias que fallan (LLINST)")
        if name in EXPERIMENT_COMMANDS:
            sub.add_argument("--x-axis", dest="x_axis", choices=("k", "lambda", "N", "J"))
            sub.add_argument("--x-values", dest="x_values", help="lista separada por comas")
            sub.add_argument("--y-values", dest="y_values", help="lista separada por comas")
        if name == "tailcheck":
            sub.add_argument("--alpha", help="lista separada por comas")
            sub.add_argument("--sharp", action="store_const", const=True, help="umbral sin relajar")
        if group == "microscopía":
            _microscopy_arguments(sub)
            if name == "smi-recover":
                _solver_arguments(sub)
                sub.add_argument("--lambda", dest="lambda", type=float)
                sub.add_argument("--merge-radius", dest="merge_radius", type=int,
                                 help="funde detecciones vecinas a esta distancia (píxeles de alta resolución)")
            elif name == "smi-synth":
                sub.add_argument("--sigma", type=float, help="desviación absoluta del ruido")
                sub.add_argument("--snr-db", dest="snr_db", type=float, help="ruido relativo al pico de la pila")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    values = vars(args)
    return {key: values[key] for key in AppConfig.DEFAULTS if key in values and values[key] is not None}


def main(argv: Optional[List[str]] = None) -> int:
    """Función principal: configura, despacha el comando y reporta errores"""
    args = build_parser().parse_args(argv)
    try:
        config = load_run_config(args.config_path, _overrides(args))
        setup_logging(config["log_level"], config["timezone"])
        command = AppConfig.get_command_config(args.command)
        logger.info("%s %s", command["icon"], command["description"])
        module = importlib.import_module(command["module"])
        return module.run(args.command, config)
    except LiftedLassoError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
