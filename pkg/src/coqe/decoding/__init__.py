"""Constrained decoding and generator implementations."""
from .core import (
    DEFAULT_MAX_LEN,
    EOS,
    AllowedSet,
    ConfigurationError,
    FreeGenerator,
    GenerationRecord,
    GeneratorError,
    GeneratorTimeout,
    ProtocolViolation,
    StepGenerator,
    build_allowed_set,
    check_scores,
    constrained_decode,
    free_decode,
)
from .external import ExternalGenerator, external_generator
from .reference import (
    CORRUPTION_KINDS,
    CorruptingGenerator,
    CorruptionConfig,
    ScriptedGenerator,
    corrupting_generator,
    oracle_generator,
)

__all__ = [
    "DEFAULT_MAX_LEN",
    "EOS",
    "AllowedSet",
    "ConfigurationError",
    "FreeGenerator",
    "GenerationRecord",
    "GeneratorError",
    "GeneratorTimeout",
    "ProtocolViolation",
    "StepGenerator",
    "build_allowed_set",
    "check_scores",
    "constrained_decode",
    "free_decode",
    "ExternalGenerator",
    "external_generator",
    "CORRUPTION_KINDS",
    "CorruptingGenerator",
    "CorruptionConfig",
    "ScriptedGenerator",
    "corrupting_generator",
    "oracle_generator",
]
