"""Table question answering toolkit: one data model over heterogeneous
table-QA datasets, linearization and retrieval for LLM prompts, derivation
execution, the standard metrics, benchmark assembly, and an HTTP service."""

from .errors import EmptyTableError, TqkError
from .tables import (
    Answer,
    AnswerFormat,
    Category,
    Cell,
    ImageRef,
    Passage,
    QAExample,
    UnifiedTable,
    find_header_rows,
    header_paths,
    normalize_table,
    validate_example,
)
from .linearize import (
    BudgetError,
    TokenBudget,
    count_tokens,
    flatten_row,
    keep_body_rows,
    to_flatten,
    to_markdown,
    truncate_rows,
)
from .programs import (
    Const,
    DerivationError,
    MathExpr,
    MathExprError,
    MathExprParseError,
    Number,
    Program,
    ProgramError,
    ProgramEvalError,
    ProgramParseError,
    SqlCondition,
    SqlDraft,
    SqlError,
    SqlParseError,
    SqlQuery,
    Step,
    StepRef,
    eval_math_expr,
    eval_program,
    exec_sql,
    execute_derivation,
    expr_to_program,
    format_number,
    parse_math_expr,
    parse_numeric_literal,
    parse_program,
    parse_sql,
    parse_sql_draft,
    print_math_expr,
    print_program,
    print_sql,
    programs_equal,
)
from .evaluation import (
    EvalReport,
    METRIC_NAMES,
    format_report,
    load_predictions,
    report_to_dict,
    evaluate_dataset,
    exact_match,
    exec_acc,
    normalize_answer,
    program_acc,
    token_f1,
)
from .retrieval import (
    Bm25Scorer,
    ConstantScorer,
    ExternalScorer,
    RetrievalUnit,
    RetrieverConfig,
    Scorer,
    UnitKind,
    extract_units,
    recall_at_k,
    retrieval_tokens,
    retrieve,
    unit_key,
)
from .ingest import (
    AdapterSpec,
    adapter_names,
    convert,
    get_adapter,
    register_adapter,
    parse_delimited,
    table_to_dict,
    example_from_dict,
    example_to_dict,
    import_delimited,
    load_unified,
    save_unified,
)
from .reasoner import (
    InputFormat,
    LlmAuthError,
    LlmClient,
    LlmEndpoint,
    LlmError,
    PromptScheme,
    PromptSpec,
    answer_question,
    build_prompt,
    complete,
    extract_answer,
    prompt_id,
)
from .benchmark import (
    BenchConfig,
    CATEGORY_ORDER,
    DEFAULT_QUOTAS,
    StatsReport,
    assemble,
    filter_by_length,
    load_bench_config,
    sample_quota,
    table_tokens,
)

from .service import ServiceConfig, TableStore, create_app, load_service_config

__version__ = "0.1.0"
