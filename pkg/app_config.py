"""
Configuración de la aplicación de línea de comandos
"""

import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional

import pytz
from dotenv import dotenv_values, load_dotenv

from components.lifted_lasso import ConfigError


class AppConfig:
    """Configuración centralizada de la aplicación"""

    COMMANDS = {
        "phase-lambda": {
            "icon": "📈",
            "description": "Diagrama de fase de recuperación exacta sobre (k, γ)",
            "module": "commands.experiments",
            "group": "experimentos",
        },
        "phase-nk": {
            "icon": "📈",
            "description": "Diagrama de fase de recuperación exacta sobre (N, K) con J fijo",
            "module": "commands.experiments",
            "group": "experimentos",
        },
        "phase-nj": {
            "icon": "📈",
            "description": "Diagrama de fase de recuperación exacta sobre (N, J) con K fijo",
            "module": "commands.experiments",
            "group": "experimentos",
        },
        "error-lambda": {
            "icon": "📉",
            "description": "Error ℓ2,∞ condicionado a recuperación exacta en función de λ",
            "module": "commands.experiments",
            "group": "experimentos",
        },
        "error-j": {
            "icon": "📉",
            "description": "Error ℓ2,∞ al cuadrado condicionado a recuperación exacta en función de J",
            "module": "commands.experiments",
            "group": "experimentos",
        },
        "bounds": {
            "icon": "🧮",
            "description": "Calculadoras de cotas: λ mínimo, número de observaciones, error, γ₀",
            "module": "commands.diagnostics",
            "group": "diagnóstico",
        },
        "certify": {
            "icon": "🔏",
            "description": "Certificado primal-dual sobre una instancia generada",
            "module": "commands.diagnostics",
            "group": "diagnóstico",
        },
        "tailcheck": {
            "icon": "🎲",
            "description": "Validación Monte Carlo de las colas gaussianas cuadráticas",
            "module": "commands.diagnostics",
            "group": "diagnóstico",
        },
        "smi-synth": {
            "icon": "🔬",
            "description": "Genera una pila sintética de cuadros y su verdad de terreno",
            "module": "commands.microscopy",
            "group": "microscopía",
        },
        "smi-recover": {
            "icon": "🔬",
            "description": "Recupera una pila FSTACK y arma la imagen de alta resolución",
            "module": "commands.microscopy",
            "group": "microscopía",
        },
        "smi-psf": {
            "icon": "🔬",
            "description": "Banco de PSF, espectro singular e imágenes de la base",
            "module": "commands.microscopy",
            "group": "microscopía",
        },
    }

    ENV_PREFIX = "LIFTLASSO_"

    # None: el comando usa su propio valor por defecto
    DEFAULTS: Dict[str, Any] = {
        "seed": 0,
        "trials": None,
        "workers": 1,
        "out_dir": "results",
        "format": "csv",
        "paper_scale": False,
        "x_axis": None,
        "x_values": None,
        "y_values": None,
        "sigma": None,
        "N": None,
        "M": None,
        "K": None,
        "J": None,
        "k": None,
        "gamma": None,
        "lambda": None,
        "basis": None,
        "max_iters": 5000,
        "kkt_tol": 1e-6,
        "step_mode": None,
        "support_threshold": None,
        "dump_failures": None,
        "alpha": None,
        "sharp": False,
        "input": None,
        "frames": 10,
        "frame_side": 8,
        "factor": 5,
        "sample_mode": "block-average",
        "psf_count": 9,
        "psf_k": 3,
        "width_min": 1.0,
        "width_max": 4.0,
        "j_max": 3,
        "ratio": None,
        "snr_db": None,
        "merge_radius": None,
        "subtract_mean": None,
        "log_level": "INFO",
        "timezone": "America/Santiago",
    }

    CHOICES = {
        "format": ("csv", "plot", "both", "xlsx"),
        "step_mode": ("fista", "bb-nonmonotone"),
        "basis": ("dft-first-k", "identity-first-k", "random-orthonormal"),
        "sample_mode": ("decimate", "block-average"),
        "log_level": ("DEBUG", "INFO", "WARNING", "ERROR"),
    }

    @staticmethod
    def get_command_config(command: str) -> Dict:
        """Obtiene configuración de un comando específico"""
        return AppConfig.COMMANDS.get(command, {})

    @staticmethod
    def get_command_menu() -> Dict[str, str]:
        """Genera el menú de ayuda de comandos"""
        return {name: f"{config['icon']} {config['description']}" for name, config in AppConfig.COMMANDS.items()}


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "si", "sí", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _parse_list(text: str) -> list:
    return [float(part) for part in text.split(",") if part.strip()]


_INT_KEYS = {"seed", "trials", "workers", "N", "M", "K", "J", "max_iters", "frames", "frame_side", "factor",
             "psf_count", "psf_k", "j_max", "merge_radius"}
_FLOAT_KEYS = {"sigma", "k", "gamma", "lambda", "kkt_tol", "support_threshold", "width_min", "width_max", "ratio",
               "snr_db"}
_BOOL_KEYS = {"paper_scale", "sharp", "subtract_mean"}
_LIST_KEYS = {"x_values", "y_values", "alpha"}

PARSERS: Dict[str, Callable[[str], Any]] = {
    **{k: int for k in _INT_KEYS},
    **{k: float for k in _FLOAT_KEYS},
    **{k: _parse_bool for k in _BOOL_KEYS},
    **{k: _parse_list for k in _LIST_KEYS},
}


def parse_value(key: str, raw: Any) -> Any:
    """Convierte un valor textual al tipo de la clave; '' equivale a no definido"""
    if key not in AppConfig.DEFAULTS:
        raise ConfigError("clave desconocida", key=key)
    if raw is None or not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text == "":
        return None
    try:
        value = PARSERS.get(key, str)(text)
    except ValueError:
        raise ConfigError(f"valor inválido '{text}'", key=key) from None
    if key == "log_level":
        value = value.upper()
    return value


def validate_config(config: Mapping[str, Any]) -> None:
    for key, choices in AppConfig.CHOICES.items():
        value = config.get(key)
        if value is not None and value not in choices:
            raise ConfigError(f"debe ser uno de {list(choices)}, se recibió '{value}'", key=key)
    if config.get("timezone") not in pytz.all_timezones_set:
        raise ConfigError(f"zona horaria desconocida '{config.get('timezone')}'", key="timezone")
    for key in ("trials", "workers", "frames", "frame_side", "factor", "psf_count", "psf_k", "j_max", "max_iters"):
        value = config.get(key)
        if value is not None and value < 1 and not (key == "workers" and value == -1):
            raise ConfigError("debe ser un entero positivo", key=key)
    if config.get("merge_radius") is not None and config["merge_radius"] < 0:
        raise ConfigError("debe ser un entero no negativo", key="merge_radius")
    if config.get("lambda") is not None and config.get("ratio") is not None:
        raise ConfigError("indique lambda o ratio, no ambos", key="ratio")
    if config.get("sigma") is not None and config.get("snr_db") is not None:
        raise ConfigError("indique sigma o snr_db, no ambos", key="snr_db")


def read_config_file(path: str) -> Dict[str, Any]:
    """Archivo `clave = valor`, comentarios con '#', listas separadas por comas"""
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"no existe el archivo {path}", key="config")
    raw = dotenv_values(file_path)
    return {key: parse_value(key, value) for key, value in raw.items()}


def read_environment(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Variables LIFTLASSO_<clave> (respetando mayúsculas de la clave)"""
    environ = os.environ if environ is None else environ
    out = {}
    for key in AppConfig.DEFAULTS:
        name = f"{AppConfig.ENV_PREFIX}{key}"
        if name in environ:
            out[key] = parse_value(key, environ[name])
    return out


def load_run_config(config_path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                    environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """
    Configuración efectiva de una corrida

    Precedencia: DEFAULTS < entorno (.env incluido) < archivo --config < flags.
    """
    if environ is None:
        load_dotenv()
    config = dict(AppConfig.DEFAULTS)
    for layer in (read_environment(environ), read_config_file(config_path) if config_path else {}):
        config.update({k: v for k, v in layer.items() if v is not None})
    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = parse_value(key, value)
    validate_config(config)
    return config


class LocalTimeFormatter(logging.Formatter):
    """Formato `[HH:MM:SS] mensaje` con la hora en la zona configurada"""

    def __init__(self, timezone: str):
        super().__init__("[%(asctime)s] %(message)s", datefmt="%H:%M:%S")
        self.tz = pytz.timezone(timezone)

    def formatTime(self, record, datefmt=None):
        stamp = datetime.fromtimestamp(record.created, self.tz)
        return stamp.strftime(datefmt or self.datefmt)


def setup_logging(level: str = "INFO", timezone: str = "America/Santiago") -> logging.Logger:
    """Instala (una sola vez) el handler de consola en el logger raíz"""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_liftlasso", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(LocalTimeFormatter(timezone))
    handler._liftlasso = True
    root.addHandler(handler)
    root.setLevel(level)
    return root
