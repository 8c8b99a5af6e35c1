from .runconfig import (
    ConfigError,
    EvalSection,
    GeneratorSection,
    RunConfig,
    ServiceSection,
    load_run_config,
    parse_run_config,
)
from .server import ApiError, ServiceState, handle_infer, make_server, serve_forever, start_background
from .cli import main

__all__ = [
    "ConfigError", "EvalSection", "GeneratorSection", "RunConfig", "ServiceSection",
    "load_run_config", "parse_run_config",
    "ApiError", "ServiceState", "handle_infer", "make_server", "serve_forever",
    "start_background", "main",
]
