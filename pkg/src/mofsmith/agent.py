"""ReAct orchestration: parse model turns, dispatch tools, track outcomes.

One session = one question. Each turn charges the token budget for the
prompt, asks the backend for a completion, parses it into a step, runs
the named tool, and charges the observation. Sessions always terminate
with one of three labels: answered, token_limit, or logic_error.

The deterministic planners in this module (RulesBackend for the outer
loop, plan_table_query and friends for the tools) make every flow
runnable without a live model.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import calc
from .core import (MofsmithError, Outcome, OutcomeLabel, extract_numbers,
                   format_number)
from .dataset import Registry, Table, UnknownColumn
from .generator import (GAConfig, GenPlan, MalformedPlan, NoParents,
                        parse_objective, registry_surrogate, run_ga)
from .llm import (Backend, CompletionRequest, TokenBudget, TokenBudgetExceeded,
                  extract_question)
from .predictor import (MaterialSelector, ModelMiss, SelectorKind, Unanswerable,
                        UnknownMaterial, answer_from_table, predict,
                        resolve_materials)
from .query import (QuerySyntaxError, TypeMismatch, execute, parse_query,
                    render_markdown)
from .structure import CifParseError, MissingCellBlock, describe_structure, parse_cif

DEFAULT_MAX_STEPS = 8
MISS_OBSERVATION = "No matching data found in the database."


class MissingKeyword(MofsmithError):
    def __init__(self, which: str):
        super().__init__(f"model output has no {which}: line")
        self.which = which


class UnknownTool(MofsmithError):
    def __init__(self, name: str):
        super().__init__(f"no tool named {name!r}")
        self.name = name


class AmbiguousStep(MofsmithError):
    pass


class NoRuleMatched(MofsmithError):
    pass


class NoColumnMatch(MofsmithError):
    """The question names no column of the schema; the search should miss."""


class ToolError(MofsmithError):
    pass


# --- domain types ----------------------------------------------------------

@dataclass
class AgentStep:
    thought: str
    action: Optional[str] = None
    action_input: Optional[str] = None
    observation: Optional[str] = None
    is_final: bool = False
    final_answer: Optional[str] = None

    def __post_init__(self):
        if self.is_final:
            if self.final_answer is None or self.action is not None:
                raise ValueError("final step needs an answer and no action")
        else:
            if self.action is None or self.action_input is None:
                raise ValueError("tool step needs action and action_input")


@dataclass
class TraceEvent:
    seq: int
    kind: str  # thought | action | observation | final | error
    payload: dict
    tokens: int


@dataclass
class AgentTrace:
    question: str
    steps: list[AgentStep] = field(default_factory=list)
    token_used: int = 0
    wall_time: float = 0.0
    events: list[TraceEvent] = field(default_factory=list)

    def append(self, step: AgentStep) -> None:
        if self.steps and self.steps[-1].is_final:
            raise ValueError("trace already has a final step")
        self.steps.append(step)


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    handler: Callable[[str, "ToolContext"], str]


@dataclass
class ToolContext:
    registry: Registry
    budget: TokenBudget
    ga_config: GAConfig = field(default_factory=GAConfig)
    notes: list[str] = field(default_factory=list)
    store: dict = field(default_factory=dict)


# --- step parsing ----------------------------------------------------------

def _strip_quotes(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1].strip()
    return text


def parse_react(text: str) -> AgentStep:
    """Split one completion into a step.

    Grammar: a `Thought:` line (may continue over following lines), then
    either `Action:` + `Action Input:` (input runs until a blank line) or
    `Final Answer:` (which takes the rest of the text). Keywords are
    case-sensitive and must start their line.
    """
    lines = text.splitlines()
    thought_at = action_at = input_at = final_at = None
    for i, line in enumerate(lines):
        if thought_at is None and line.startswith("Thought:"):
            thought_at = i
        elif line.startswith("Action Input:") and input_at is None:
            input_at = i
        elif line.startswith("Action:") and action_at is None:
            action_at = i
        elif line.startswith("Final Answer:") and final_at is None:
            final_at = i
    if thought_at is None:
        raise MissingKeyword("Thought")
    if action_at is not None and final_at is not None:
        raise AmbiguousStep("completion contains both Action and Final Answer")

    if final_at is not None:
        thought = _collect(lines, thought_at, stop=final_at, prefix="Thought:")
        answer_lines = [lines[final_at][len("Final Answer:"):].strip()]
        answer_lines.extend(lines[final_at + 1:])
        answer = "\n".join(answer_lines).strip()
        if not answer:
            raise MissingKeyword("Final Answer")
        return AgentStep(thought=thought, is_final=True, final_answer=answer)

    if action_at is None:
        raise MissingKeyword("Action")
    if input_at is None or input_at < action_at:
        raise MissingKeyword("Action Input")
    thought = _collect(lines, thought_at, stop=action_at, prefix="Thought:")
    action = _strip_quotes(lines[action_at][len("Action:"):].strip().strip("`"))
    input_lines = [lines[input_at][len("Action Input:"):]]
    for line in lines[input_at + 1:]:
        if not line.strip() or line.startswith("Observation:"):
            break
        input_lines.append(line)
    action_input = _strip_quotes("\n".join(input_lines).strip())
    if not action:
        raise MissingKeyword("Action")
    return AgentStep(thought=thought, action=action, action_input=action_input)


def _collect(lines: list[str], start: int, stop: int, prefix: str) -> str:
    chunk = [lines[start][len(prefix):].strip()]
    for line in lines[start + 1: stop]:
        if line.strip():
            chunk.append(line.strip())
    return " ".join(part for part in chunk if part)


# --- scratchpad & prompts ----------------------------------------------------

def render_scratchpad(trace: AgentTrace) -> str:
    """Byte-stable transcript of completed steps."""
    parts = []
    for step in trace.steps:
        if step.is_final:
            parts.append(f"Thought: {step.thought}\nFinal Answer: {step.final_answer}\n")
        else:
            parts.append(f"Thought: {step.thought}\n"
                         f"Action: {step.action}\n"
                         f"Action Input: {step.action_input}\n"
                         f"Observation: {step.observation}\n")
    return "\n".join(parts)


def build_system_prompt(tools: dict[str, ToolDescriptor]) -> str:
    seen = []
    for name, descriptor in tools.items():
        if descriptor.name == name:  # skip alias keys
            seen.append(f"- {name}: {descriptor.description}")
    names = ", ".join(sorted(tools))
    return ("You answer materials questions using tools.\n"
            "Tools:\n" + "\n".join(seen) + "\n"
            "Reply in this format:\n"
            "Thought: reasoning about the next move\n"
            f"Action: one of [{names}]\n"
            "Action Input: input for the tool\n"
            "…wait for Observation, then continue. To finish:\n"
            "Thought: closing reasoning\n"
            "Final Answer: the answer")


def build_user_prompt(question: str, trace: AgentTrace) -> str:
    scratchpad = render_scratchpad(trace)
    if scratchpad:
        return f"Question: {question}\n\n{scratchpad}"
    return f"Question: {question}\n"


# --- question analysis helpers ----------------------------------------------

_WORD = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_STOPWORDS = {
    "the", "a", "an", "of", "for", "and", "or", "is", "are", "what", "whats",
    "which", "how", "does", "do", "can", "you", "me", "tell", "high", "it",
    "its", "with", "in", "on", "at", "to", "provide", "information", "search",
    "name", "material", "materials", "mof", "mofs", "structure", "structures",
    "value", "please", "all", "other", "compare", "compared", "than", "about",
}


def _content_tokens(text: str) -> list[str]:
    return [w.casefold() for w in _WORD.findall(text)
            if w.casefold() not in _STOPWORDS]


def _header_tokens(header: str) -> list[str]:
    bare = header.split("(")[0]
    return [w.casefold() for w in _WORD.findall(bare) if len(w) > 1]


def match_column(question: str, table: Table, exclude: frozenset[str] = frozenset()) -> Optional[str]:
    """Best-matching column header for the question wording, or None.

    Score = header-coverage + question-coverage; a header needs at least
    half its words present in the question. Ties keep the earliest column.
    """
    q_tokens = set(_content_tokens(question))
    if not q_tokens:
        return None
    best: Optional[str] = None
    best_score = 0.0
    for column in table.columns:
        if column.header in exclude or column.header == table.key_column:
            continue
        h_tokens = _header_tokens(column.header)
        if not h_tokens:
            continue
        matched = sum(1 for t in h_tokens if t in q_tokens)
        if matched == 0 or matched / len(h_tokens) < 0.5:
            continue
        score = matched / len(h_tokens) + matched / len(q_tokens)
        if score > best_score:
            best_score = score
            best = column.header
    return best


def find_material(question: str, table: Table) -> Optional[str]:
    """First question token that resolves to a key of ``table``."""
    for word in _WORD.findall(question):
        if len(word) < 4 or word.casefold() in _STOPWORDS:
            continue
        position = table.row_position(word)
        if position is not None:
            return table.keys()[position]
    return None


def match_property(question: str, registry: Registry,
                   gene_keyed: Optional[bool] = None) -> Optional[str]:
    """Registered property whose name or alias best matches the question."""
    q_tokens = set(_content_tokens(question))
    best = None
    best_score = 0.0
    for name in registry.property_names():
        registration = registry.lookup(name)
        if gene_keyed is not None:
            is_gene = registration.material_kind.value == "gene"
            if is_gene != gene_keyed:
                continue
        candidates = [name.replace("_", " ")] + list(registration.property.aliases)
        for candidate in candidates:
            tokens = [t for t in _content_tokens(candidate)]
            if not tokens:
                continue
            matched = sum(1 for t in tokens if t in q_tokens)
            if matched == 0 or matched / len(tokens) < 0.5:
                continue
            score = matched / len(tokens) + matched / len(q_tokens)
            if score > best_score:
                best_score = score
                best = name
    return best


# --- deterministic table-query planner ---------------------------------------

_TOP_K = re.compile(r"\b(top|highest|largest|biggest|greatest|lowest|smallest)\b"
                    r"(?:\s+(\d+))?", re.IGNORECASE)
_THRESHOLD = re.compile(
    r"(greater|more|larger|higher|less|smaller|lower)\s+than\s+(?:an?\s+)?"
    r"([-+]?\d+(?:\.\d+)?)",
    re.IGNORECASE)
_REFCODE = re.compile(r"\b[A-Z]{4,}[A-Za-z0-9_]*\b")


def _quote(header: str) -> str:
    return f"`{header}`"


def plan_table_query(question: str, schema: Table,
                     last_error: Optional[str] = None) -> str:
    """Turn a search request into DSL text (one query per line).

    Rules, in order: compare-with-others → keyed select + DESCRIBE;
    "…of all materials" → full select; named material → keyed select;
    top/highest k → ordered select; threshold → filtered select.
    Raises NoColumnMatch when the wording names no known column, and
    NoRuleMatched when no pattern applies at all.
    """
    exclude = set()
    if last_error:
        for header in schema.headers:
            if header in last_error:
                exclude.add(header)
    q = question.casefold()
    key = _quote(schema.key_column)
    table_name = schema.name

    wants_compare = "compare" in q
    wants_all = "all materials" in q or "every material" in q
    material = find_material(question, schema)
    column = match_column(question, schema, exclude=frozenset(exclude))

    if wants_compare and material is not None:
        if column is None:
            raise NoColumnMatch(question)
        keyed = (f"SELECT {_quote(column)} FROM {table_name} "
                 f"WHERE {key} == '{material}'")
        return keyed + "\n" + f"DESCRIBE {_quote(column)} FROM {table_name}"

    if wants_all:
        if column is None:
            raise NoColumnMatch(question)
        return f"SELECT {key}, {_quote(column)} FROM {table_name}"

    if material is not None:
        if column is None:
            raise NoColumnMatch(question)
        return (f"SELECT {_quote(column)} FROM {table_name} "
                f"WHERE {key} == '{material}'")

    top = _TOP_K.search(question)
    if top is not None:
        if column is None:
            raise NoColumnMatch(question)
        k = int(top.group(2)) if top.group(2) else 1
        direction = "ASC" if top.group(1).casefold() in ("lowest", "smallest") else "DESC"
        return (f"SELECT {key}, {_quote(column)} FROM {table_name} "
                f"ORDER BY {_quote(column)} {direction} LIMIT {k}")

    threshold = _THRESHOLD.search(question)
    if threshold is not None:
        if column is None:
            raise NoColumnMatch(question)
        op = ">" if threshold.group(1).casefold() in ("greater", "more", "larger", "higher") else "<"
        return (f"SELECT {key}, {_quote(column)} FROM {table_name} "
                f"WHERE {_quote(column)} {op} {threshold.group(2)} LIMIT 10")

    # A lookup was clearly intended (explicit search phrasing, or a
    # refcode-style material name) but nothing resolved: the data is simply
    # not in this table, which is a miss rather than an unusable request.
    if _REFCODE.search(question) or "search" in q:
        raise NoColumnMatch(question)

    raise NoRuleMatched(f"no table-search rule applies to {question!r}")


# --- tool handlers -----------------------------------------------------------

def search_csv_tool(input_text: str, ctx: ToolContext) -> str:
    table = ctx.registry.primary()
    last_error: Optional[str] = None
    for _ in range(3):
        try:
            plan_text = plan_table_query(input_text, table, last_error)
        except NoColumnMatch:
            return MISS_OBSERVATION
        except NoRuleMatched as exc:
            raise ToolError(str(exc)) from None
        try:
            parts = []
            for line in plan_text.splitlines():
                if not line.strip():
                    continue
                plan = parse_query(line)
                ctx.notes.append(f"[Table Searcher] Query: {line}")
                result = execute(plan, table)
                if plan.kind == "select" and not result.rows:
                    return MISS_OBSERVATION
                parts.append(render_markdown(result, ctx.budget.remaining,
                                             ctx.budget.estimator))
            return "\n\n".join(parts)
        except (QuerySyntaxError, UnknownColumn) as exc:
            last_error = str(exc)
            ctx.notes.append(f"[Table Searcher] Retry: {exc}")
            continue
        except TypeMismatch as exc:
            raise ToolError(str(exc)) from None
    raise ToolError(f"no valid query after retries: {last_error}")


def _selector_from_question(question: str, lookup_table: Table) -> MaterialSelector:
    q = question.casefold()
    if "all materials" in q or "every material" in q:
        return MaterialSelector(SelectorKind.ALL)
    material = find_material(question, lookup_table)
    if material is not None:
        return MaterialSelector(SelectorKind.NAMED, names=(material,))
    for topology in ("pcu", "dia", "acs", "rtl", "cds", "srs", "ths", "bcu", "fsc"):
        if re.search(rf"\b{topology}\b", q):
            return MaterialSelector(SelectorKind.TOPOLOGY, topology=topology)
    if _TOP_K.search(question) or _THRESHOLD.search(question):
        # superlative or cutoff questions range over every material
        return MaterialSelector(SelectorKind.ALL)
    raise ToolError(f"no material named in {question!r}")


def predictor_tool(input_text: str, ctx: ToolContext) -> str:
    prop = match_property(input_text, ctx.registry, gene_keyed=False)
    if prop is None:
        prop = match_property(input_text, ctx.registry)
    if prop is None:
        raise ToolError("no registered model matches this request")
    registration = ctx.registry.lookup(prop)
    lookup_table = ctx.registry.table(registration.table)
    selector = _selector_from_question(input_text, lookup_table)
    try:
        ids = resolve_materials(selector, lookup_table)
    except UnknownMaterial as exc:
        raise ToolError(str(exc)) from None
    if not ids:
        raise ToolError("the selector matched no material")
    ctx.notes.append(f"[Predictor] Property: {prop}")
    ctx.notes.append(f"[Predictor] Materials: {', '.join(ids[:5])}"
                     + ("…" if len(ids) > 5 else ""))
    try:
        prediction = predict(prop, ids, ctx.registry)
    except ModelMiss as exc:
        raise ToolError(str(exc)) from None
    try:
        return answer_from_table(input_text, prediction)
    except Unanswerable:
        return prediction.to_markdown(ctx.budget.remaining, ctx.budget.estimator)


_NEAR = re.compile(r"\b(?:near|close to|about|around|approximately|of)\s+"
                   r"([-+]?\d+(?:\.\d+)?)", re.IGNORECASE)
_BETWEEN = re.compile(r"between\s+([-+]?\d+(?:\.\d+)?)\s+and\s+([-+]?\d+(?:\.\d+)?)",
                      re.IGNORECASE)


def plan_generation(question: str, registry: Registry) -> GenPlan:
    """Deterministic GenPlan from a generation request."""
    prop = match_property(question, registry, gene_keyed=True)
    if prop is None:
        raise MalformedPlan(f"no gene-keyed property matches {question!r}")
    q = question.casefold()
    between = _BETWEEN.search(question)
    near = _NEAR.search(question)
    if between is not None:
        objective = parse_objective(f"range {between.group(1)} {between.group(2)}")
    elif near is not None:
        objective = parse_objective(f"near {near.group(1)}")
    elif any(w in q for w in ("largest", "highest", "maximum", "maximal", "max", "biggest")):
        objective = parse_objective("max")
    elif any(w in q for w in ("smallest", "lowest", "minimum", "minimal", "min")):
        objective = parse_objective("min")
    else:
        raise MalformedPlan(f"no objective recognized in {question!r}")
    return GenPlan(properties=[prop], objectives=[objective])


def generator_tool(input_text: str, ctx: ToolContext) -> str:
    try:
        plan = plan_generation(input_text, ctx.registry)
    except MalformedPlan as exc:
        raise ToolError(str(exc)) from None
    pool = ctx.registry.pool()
    if pool is None:
        raise ToolError("no gene pool table registered")
    try:
        result = run_ga(plan, ctx.ga_config, pool, registry_surrogate(ctx.registry))
    except NoParents as exc:
        raise ToolError(str(exc)) from None
    ctx.store.setdefault("ga_results", []).append(result)
    prop = plan.properties[0]
    best = result.best
    ctx.notes.append(f"[Generator] Objective: {plan.objectives[0].describe()}")
    ctx.notes.append(f"[Generator] Topologies: {len(result.runs)}, "
                     f"generations: {ctx.ga_config.cycles + 1}")
    return (f"Refinement finished: the best candidate is {best.gene} "
            f"with predicted {prop} = {format_number(best.values[0])}.")


_CODE_FENCE = re.compile(r"```[a-zA-Z]*\n?|```")
_PRINT_WRAP = re.compile(r"print\s*\((.*)\)\s*$", re.DOTALL)


def normalize_calc_input(text: str) -> str:
    """Accept light code dressing around a bare expression."""
    text = _CODE_FENCE.sub("\n", text)
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines
             if ln and not ln.startswith(("import ", "from ")) and ln != "python"]
    text = " ".join(lines).strip()
    m = _PRINT_WRAP.search(text)
    if m is not None:
        text = m.group(1)
    return text.replace("math.", "").strip()


def calculator_tool(input_text: str, ctx: ToolContext) -> str:
    expression = normalize_calc_input(input_text)
    try:
        return calc.run_calculator(expression)
    except (calc.ParseError, calc.DomainError) as exc:
        raise ToolError(str(exc)) from None


def structure_info_tool(input_text: str, ctx: ToolContext) -> str:
    path = _strip_quotes(input_text)
    try:
        info = parse_cif(path)
    except (CifParseError, MissingCellBlock) as exc:
        raise ToolError(str(exc)) from None
    return describe_structure(info)


def internet_search_tool(input_text: str, ctx: ToolContext) -> str:
    return ("Internet search is not available in this build; "
            "only local data sources can be used.")


def default_toolkit() -> dict[str, ToolDescriptor]:
    descriptors = [
        ToolDescriptor("search_csv", "look up tabulated material properties",
                       search_csv_tool),
        ToolDescriptor("predictor", "predict a property with a registered model",
                       predictor_tool),
        ToolDescriptor("generator", "inverse-design materials for an objective",
                       generator_tool),
        ToolDescriptor("calculator", "evaluate an arithmetic expression",
                       calculator_tool),
        ToolDescriptor("structure_info", "summarize a CIF structure file",
                       structure_info_tool),
        ToolDescriptor("internet_search", "stub: always reports unavailability",
                       internet_search_tool),
    ]
    tools = {d.name: d for d in descriptors}
    tools["Python_REPL"] = tools["calculator"]  # historical alias
    return tools


# --- session loop ------------------------------------------------------------

def _emit(trace: AgentTrace, kind: str, payload: dict, tokens: int) -> None:
    trace.events.append(TraceEvent(seq=len(trace.events), kind=kind,
                                   payload=payload, tokens=tokens))


def run_session(question: str, tools: dict[str, ToolDescriptor], backend: Backend,
                budget: TokenBudget, context: ToolContext,
                max_steps: int = DEFAULT_MAX_STEPS) -> Outcome:
    """Drive one question to a labeled outcome.

    Failure mapping: budget overflow anywhere → token_limit; unknown tool,
    ambiguous step, second tool failure, or step exhaustion → logic_error.
    A model turn that stops after its thought is answered from the last
    observation (the evaluator path).
    """
    trace = AgentTrace(question=question)
    system_prompt = build_system_prompt(tools)
    started = time.monotonic()
    tool_failures = 0
    pending = 0  # charges taken this turn but not yet attached to an event

    def finish(label: OutcomeLabel, answer: Optional[str] = None,
               detail: str = "") -> Outcome:
        trace.token_used = budget.used
        trace.wall_time = time.monotonic() - started
        if label is not OutcomeLabel.ANSWERED:
            _emit(trace, "error", {"label": label.value, "detail": detail}, pending)
        return Outcome(label=label, answer=answer, trace=trace, detail=detail)

    for _ in range(max_steps):
        prompt = build_user_prompt(question, trace)
        try:
            budget.charge(prompt)
        except TokenBudgetExceeded as exc:
            return finish(OutcomeLabel.TOKEN_LIMIT, detail=str(exc))
        pending = budget.estimator(prompt)
        request = CompletionRequest(system_prompt=system_prompt, user_prompt=prompt,
                                    stop_sequences=["Observation:"])
        try:
            completion = backend.complete(request)
        except MofsmithError as exc:
            return finish(OutcomeLabel.LOGIC_ERROR, detail=f"backend: {exc}")
        completion = completion.split("\nObservation:")[0]
        try:
            budget.charge(completion)
        except TokenBudgetExceeded as exc:
            return finish(OutcomeLabel.TOKEN_LIMIT, detail=str(exc))
        pending += budget.estimator(completion)
        turn_tokens = pending

        try:
            step = parse_react(completion)
        except MissingKeyword as exc:
            if exc.which == "Action" and any(s.observation for s in trace.steps):
                # evaluator path: close out from what we already observed
                last = next(s.observation for s in reversed(trace.steps)
                            if s.observation)
                answer = f"Based on the gathered results: {last}"
                step = AgentStep(thought="Synthesizing the answer from observations",
                                 is_final=True, final_answer=answer)
                trace.append(step)
                _emit(trace, "final", {"thought": step.thought, "answer": answer},
                      turn_tokens)
                pending = 0
                return finish(OutcomeLabel.ANSWERED, answer=answer)
            return finish(OutcomeLabel.LOGIC_ERROR, detail=str(exc))
        except AmbiguousStep as exc:
            return finish(OutcomeLabel.LOGIC_ERROR, detail=str(exc))

        if step.is_final:
            trace.append(step)
            _emit(trace, "final", {"thought": step.thought,
                                   "answer": step.final_answer}, turn_tokens)
            pending = 0
            return finish(OutcomeLabel.ANSWERED, answer=step.final_answer)

        _emit(trace, "thought", {"text": step.thought}, turn_tokens)
        pending = 0
        _emit(trace, "action", {"tool": step.action, "input": step.action_input}, 0)

        if step.action not in tools:
            return finish(OutcomeLabel.LOGIC_ERROR, detail=str(UnknownTool(step.action)))
        context.notes = []
        try:
            observation = tools[step.action].handler(step.action_input, context)
        except ToolError as exc:
            tool_failures += 1
            if tool_failures > 1:
                return finish(OutcomeLabel.LOGIC_ERROR,
                              detail=f"{step.action} failed twice: {exc}")
            observation = (f"The {step.action} tool could not complete this "
                           f"request ({exc}). A different approach is needed.")
        except TokenBudgetExceeded as exc:
            return finish(OutcomeLabel.TOKEN_LIMIT, detail=str(exc))
        try:
            budget.charge(observation)
        except TokenBudgetExceeded as exc:
            return finish(OutcomeLabel.TOKEN_LIMIT, detail=str(exc))
        step.observation = observation
        trace.append(step)
        _emit(trace, "observation",
              {"text": observation, "notes": list(context.notes)},
              budget.estimator(observation))

    return finish(OutcomeLabel.LOGIC_ERROR,
                  detail=f"no final answer within {max_steps} steps")


# --- trace serialization ------------------------------------------------------

def trace_to_json(trace: AgentTrace) -> dict:
    return {
        "question": trace.question,
        "token_used": trace.token_used,
        "wall_time": trace.wall_time,
        "steps": [
            {
                "thought": s.thought, "action": s.action,
                "action_input": s.action_input, "observation": s.observation,
                "is_final": s.is_final, "final_answer": s.final_answer,
            }
            for s in trace.steps
        ],
        "events": [
            {"seq": e.seq, "kind": e.kind, "payload": e.payload, "tokens": e.tokens}
            for e in trace.events
        ],
    }


def trace_from_json(data: dict) -> AgentTrace:
    trace = AgentTrace(question=data["question"],
                       token_used=data["token_used"],
                       wall_time=data["wall_time"])
    for s in data["steps"]:
        trace.steps.append(AgentStep(
            thought=s["thought"], action=s["action"],
            action_input=s["action_input"], observation=s["observation"],
            is_final=s["is_final"], final_answer=s["final_answer"]))
    for e in data["events"]:
        trace.events.append(TraceEvent(seq=e["seq"], kind=e["kind"],
                                       payload=e["payload"], tokens=e["tokens"]))
    return trace


def trace_to_jsonl(trace: AgentTrace, session_id: str) -> str:
    """Event-stream form: one JSON object per line, schema shared with serve."""
    lines = []
    for event in trace.events:
        lines.append(json.dumps({
            "session_id": session_id, "seq": event.seq, "kind": event.kind,
            "payload": event.payload, "tokens": event.tokens,
        }, ensure_ascii=False))
    return "\n".join(lines)


# --- deterministic top-level planner ------------------------------------------

_OBSERVATION_SPLIT = re.compile(r"^Observation: ", re.MULTILINE)


def _scratchpad_observations(user_prompt: str) -> list[str]:
    chunks = _OBSERVATION_SPLIT.split(user_prompt)[1:]
    out = []
    for chunk in chunks:
        # an observation runs until the next step's Thought (observations may
        # themselves contain blank lines, e.g. two stacked tables)
        end = chunk.find("\n\nThought:")
        out.append(chunk[:end].rstrip() if end != -1 else chunk.rstrip())
    return out


class RulesBackend:
    """Planner that emits ReAct turns from fixed rules — no model involved.

    Good enough for keyed lookups, compare/describe flows, predictions,
    log-value conversion via the calculator, structure files, and
    generation requests. Raises NoRuleMatched when the question fits
    nothing, which the session reports as a logic error.
    """

    def __init__(self, registry: Registry):
        self.registry = registry

    def complete(self, request: CompletionRequest) -> str:
        question = extract_question(request.user_prompt)
        observations = _scratchpad_observations(request.user_prompt)
        if not observations:
            return self._first_turn(question)
        last = observations[-1]
        if last.startswith("The") and "could not complete this request" in last:
            return ("Thought: The tool failed, so the question cannot be answered "
                    "from available data\n"
                    "Final Answer: I could not find or compute the requested value.")
        if last == MISS_OBSERVATION:
            prop = match_property(question, self.registry)
            if prop is not None:
                return (f"Thought: The table has no such column, so a model "
                        f"prediction is needed\nAction: predictor\n"
                        f"Action Input: {question}")
            return ("Thought: The database has no matching data\n"
                    "Final Answer: The database does not contain this information.")
        if "logarithmic value" in last:
            # the prediction itself is the bold value; label text may carry
            # other digits (e.g. a temperature), so don't take the first number
            bold = re.search(r"\*\*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)", last)
            numbers = extract_numbers(last)
            value = float(bold.group(1)) if bold else (numbers[-1] if numbers else None)
            if value is not None:
                return (f"Thought: I need to convert the logarithmic value back\n"
                        f"Action: Python_REPL\n"
                        f"Action Input: exp({format_number(value)})")
        return self._final_turn(question, last)

    # first turn: choose the opening tool
    def _first_turn(self, question: str) -> str:
        q = question.casefold()
        if ".cif" in q:
            path = next((w for w in question.split() if w.casefold().endswith(".cif")),
                        question)
            return (f"Thought: I should inspect the structure file\n"
                    f"Action: structure_info\nAction Input: {path}")
        bare = re.sub(r"^\s*(what\s+is|what's|calculate|compute|evaluate)\s+", "",
                      question.rstrip("?. "), flags=re.IGNORECASE)
        bare = normalize_calc_input(bare)
        try:
            calc.eval_expr(bare)
        except MofsmithError:
            pass
        else:
            return (f"Thought: This is a direct calculation\n"
                    f"Action: Python_REPL\nAction Input: {bare}")
        if any(w in q for w in ("generate", "design", "propose a", "invent")):
            return (f"Thought: This asks for new materials, so I should run the "
                    f"generator\nAction: generator\nAction Input: {question}")
        if "predict" in q:
            return (f"Thought: This asks for a model prediction\n"
                    f"Action: predictor\nAction Input: {question}")
        return (f"Thought: I should look this up in the tables\n"
                f"Action: search_csv\nAction Input: {question}")

    def _final_turn(self, question: str, observation: str) -> str:
        sentence = self._sentence_from(question, observation)
        return f"Thought: I now know the final answer\nFinal Answer: {sentence}"

    def _sentence_from(self, question: str, observation: str) -> str:
        tables = _parse_markdown_tables(observation)
        if not tables:
            numbers = extract_numbers(observation)
            if observation.count("\n") == 0 and len(numbers) == 1 \
                    and observation.strip() == format_number(numbers[0]):
                return f"The calculated value is approximately {format_number(numbers[0])}."
            return observation
        headers, rows = tables[0]
        material = find_material(question, self.registry.primary()) or ""
        # prose label: drop any parenthesized unit so the value stays the
        # first number in the sentence
        column = headers[-1].split("(")[0].strip()
        if len(tables) == 2 and rows:
            # keyed value + DESCRIBE comparison
            value = rows[0][-1]
            stat_headers, stat_rows = tables[1]
            stats = {r[0]: r[-1] for r in stat_rows}
            return (f"The {column} of {material or rows[0][0]} is {value}; "
                    f"across all materials the mean is {stats.get('mean')} "
                    f"with a standard deviation of {stats.get('std')}.")
        if len(rows) == 1 and len(headers) >= 2:
            value = rows[0][-1]
            label = material or rows[0][0]
            return f"The {column} for {label} is {value}."
        if len(rows) >= 1 and len(rows[0]) >= 3:
            listing = ", ".join(f"{r[1]} ({r[-1]})" for r in rows)
            return f"Ranked by {column}: {listing}."
        return observation


def _parse_markdown_tables(text: str) -> list[tuple[list[str], list[list[str]]]]:
    tables = []
    current: Optional[tuple[list[str], list[list[str]]]] = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("|"):
            cells = [c.strip() for c in stripped.strip("|").split("|")]
            if all(set(c) <= {"-", " ", ":"} and c for c in cells):
                continue  # separator row
            if current is None:
                current = (cells, [])
                tables.append(current)
            else:
                current[1].append(cells)
        else:
            current = None
    return tables
