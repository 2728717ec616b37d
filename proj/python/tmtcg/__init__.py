"""Threat-model driven test generation for MQTT brokers."""

from ._tmtcg import (
    ConfigError,
    FormatError,
    MockServer,
    StageError,
    SutDownError,
    UsageError,
    derive,
    diff,
    encode_remaining_length,
    execute,
    generate,
    import_threats,
    report_info,
    run_pipeline,
    topic_matches,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "MockServer",
    "StageError",
    "SutDownError",
    "UsageError",
    "derive",
    "diff",
    "encode_remaining_length",
    "execute",
    "generate",
    "import_threats",
    "report_info",
    "run_pipeline",
    "topic_matches",
]
