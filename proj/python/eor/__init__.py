"""Python bindings for the eor C++ core."""

from ._core import (  # noqa: F401
    ParseError,
    analytic_failure,
    contains_answer,
    describe_plan,
    em_similarity,
    ensemble_upper_bound,
    error_rwr_matrix,
    format_plan,
    generate_world,
    mrlr,
    mrwr,
    nelder_mead,
    normalize_answer,
    parse_plan,
    reference_retriever_pool,
    render_prompt,
    rwr,
    rwr_matrix,
    simulate,
    token_f1,
    train,
    verify_decomposition,
    vote,
)

__all__ = [name for name in dir() if not name.startswith("_")]
