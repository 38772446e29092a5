"""
Manejadores de comandos de la línea de comandos

Cada módulo expone `run(command, config) -> int`; el registro está en `AppConfig.COMMANDS`.
"""
