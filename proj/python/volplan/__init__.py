"""Python bindings for the volplan C++ core."""

import json as _json

from ._core import (
    BIAS_BINS,
    PlanParseError,
    PlanningError,
    ade,
    bade,
    bin_index,
    check_grad,
    classify_behavior,
    decode_plan,
    derive_command,
    encode_prompt,
    encode_target,
    format2,
    generate_corpus,
    label_meta_decision,
    lift_dense,
    log_bin_edges,
    nucleus_support,
    quantize2,
    registered_ops,
)
from ._core import evalrun as _evalrun


def evalrun(corpus, out, **kwargs):
    """Evaluate a corpus and return (report dict, self-check violations)."""
    text, violations = _evalrun(str(corpus), str(out), **kwargs)
    return _json.loads(text), list(violations)


__all__ = [name for name in dir() if not name.startswith("_")]
