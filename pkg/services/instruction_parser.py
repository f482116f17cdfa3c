"""
Instruction parsing: split a stylization command into the style to apply
(stylized content) and the target object (stylized objects).

Two parsers share one contract (RawInstruction -> ParsedInstruction):
- an LLM parser: build_prompt -> query_llm -> parse_llm_response
- a deterministic rule-based fallback (fallback_split) for offline runs

evaluate_corpus scores either parser against a gold corpus with the exact-match
rule: both fields equal gold after trimming, case-insensitively.
"""

import json
import logging
import re
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import httpx

from models.errors import (
    ConfigurationError,
    InstructionParseError,
    InvalidInputError,
    MissingFieldError,
    NoMatchError,
    StylizeError,
)
from models.instruction import EvalItem, EvalReport, ParsedInstruction, RawInstruction
from models.style_config import EndpointConfig
from services.data_persistence import read_jsonl
from services.llm_client import build_messages, LLMClient, query_llm

logger = logging.getLogger(__name__)

Parser = Callable[[RawInstruction], ParsedInstruction]
Judge = Callable[[RawInstruction, ParsedInstruction], float]

PROMPT_TEMPLATE = (
    'Split ["{text}"] into [Stylized Content] and [Stylized Objects]. '
    'Returns a json with two keys: StylizedContent and StylizedObjects.'
)
_PROMPT_PATTERN = re.compile(
    r'^Split \["(?P<text>(?:[^"\\]|\\.)*)"\] into \[Stylized Content\]', re.DOTALL
)

CONTENT_KEY = 'StylizedContent'
OBJECTS_KEY = 'StylizedObjects'

_FENCE = re.compile(r'```[A-Za-z0-9_-]*\s*\n?(.*?)```', re.DOTALL)

# Leading filler that carries no content or object information.
_POLITE_PREFIX = re.compile(r'^(?:please\s+|can\s+you\s+|could\s+you\s+|i\s+want\s+to\s+)+', re.IGNORECASE)
_TRAILING_PUNCT = re.compile(r'[\s.!?]+$')
# "the art of origami" -> "origami", "the style of Van Gogh" -> "Van Gogh", "the art on fire" -> "art on fire"
_CONTENT_PREFIX = re.compile(r'^(?:the\s+)?(?:(?:art|style)\s+of\s+)?', re.IGNORECASE)
_RESTYLE_VERB = r'(?:(?:paint|render|draw|redraw|stylize|restyle|show)\s+)?'

# First match wins; ambiguous instructions take the first split a pattern finds.
FALLBACK_PATTERNS: Tuple[Tuple[str, re.Pattern], ...] = (
    ('turn_to', re.compile(
        r'^(?:turn|change|transform|convert)\s+(?P<objects>.+?)\s+(?:to|into)\s+(?P<content>.+)$',
        re.IGNORECASE | re.DOTALL)),
    ('make_look_like', re.compile(
        r'^make\s+(?P<objects>.+?)\s+(?:look\s+like|resemble|into)\s+(?P<content>.+)$',
        re.IGNORECASE | re.DOTALL)),
    ('make_adjective', re.compile(
        r'^make\s+(?P<objects>(?:the|a|an|this|that|my|our)\s+\S+)\s+(?P<content>.+)$',
        re.IGNORECASE | re.DOTALL)),
    ('apply_to', re.compile(
        r'^(?:apply|add|use)\s+(?P<content>.+?)\s+(?:onto|to|on)\s+(?P<objects>.+)$',
        re.IGNORECASE | re.DOTALL)),
    ('in_style_of', re.compile(
        _RESTYLE_VERB + r'(?P<objects>.+)\s+in\s+the\s+style\s+of\s+(?P<content>.+)$',
        re.IGNORECASE | re.DOTALL)),
    ('in', re.compile(
        _RESTYLE_VERB + r'(?P<objects>.+?)\s+in\s+(?P<content>.+)$',
        re.IGNORECASE | re.DOTALL)),
)


def _as_raw(instruction) -> RawInstruction:
    if isinstance(instruction, RawInstruction):
        return instruction
    return RawInstruction(instruction)


def build_prompt(instruction: RawInstruction) -> str:
    """
    Fill the split prompt with an instruction.

    Backslashes and double quotes are escaped so the bracketed quote structure
    survives; extract_instruction reverses the escaping.

    Raises:
        InvalidInputError: If the instruction is empty
    """
    raw = _as_raw(instruction)
    escaped = raw.text.replace('\\', '\\\\').replace('"', '\\"')
    return PROMPT_TEMPLATE.format(text=escaped)


def extract_instruction(prompt: str) -> RawInstruction:
    """
    Recover the instruction embedded in a prompt made by build_prompt.

    Raises:
        InstructionParseError: If the prompt does not have the template's shape
    """
    match = _PROMPT_PATTERN.match(prompt)
    if not match:
        raise InstructionParseError("Prompt does not follow the split template")
    text = re.sub(r'\\(.)', r'\1', match.group('text'))
    return RawInstruction(text)


def _normalize_key(key: str) -> str:
    return re.sub(r'[\s_-]+', '', key).lower()


def _find_json_object(text: str) -> Optional[dict]:
    """First decodable JSON object in text, looking inside code fences first."""
    candidates = [m.group(1) for m in _FENCE.finditer(text)] + [text]
    decoder = json.JSONDecoder()
    for candidate in candidates:
        for start, char in enumerate(candidate):
            if char != '{':
                continue
            try:
                obj, _ = decoder.raw_decode(candidate, start)
            except json.JSONDecodeError:
                continue
            if isinstance(obj, dict):
                return obj
    return None


def parse_llm_response(response: str) -> ParsedInstruction:
    """
    Extract the split from arbitrary model output.

    Locates the first JSON object (tolerating prose and Markdown fences) and
    accepts "StylizedContent"/"Stylized Content" and
    "StylizedObjects"/"Stylized Objects" in any letter case.

    Raises:
        InstructionParseError: No JSON object in the response
        MissingFieldError: A key is missing or its value is empty
    """
    obj = _find_json_object(response or '')
    if obj is None:
        raise InstructionParseError(
            f"No JSON object with {CONTENT_KEY} and {OBJECTS_KEY} found in response",
            key=CONTENT_KEY,
        )

    by_key = {_normalize_key(str(k)): v for k, v in obj.items()}
    values = {}
    for key in (CONTENT_KEY, OBJECTS_KEY):
        value = by_key.get(key.lower())
        if not isinstance(value, str) or not value.strip():
            raise MissingFieldError(f"Response JSON lacks a non-empty {key}", key=key)
        values[key] = value.strip()

    return ParsedInstruction(
        stylized_content=values[CONTENT_KEY],
        stylized_objects=values[OBJECTS_KEY],
    )


def _clean_content(content: str) -> str:
    return _CONTENT_PREFIX.sub('', content.strip(), count=1).strip()


def fallback_split(instruction: RawInstruction) -> ParsedInstruction:
    """
    Rule-based split, deterministic and offline.

    Patterns, in order: "turn/change X to/into Y", "make X look like Y",
    "make the X Y", "apply Y to X", "X in the style of Y", "X in Y".
    Leading "the", "the art of" and "the style of" are stripped from the style.

    Raises:
        NoMatchError: If no pattern matches
    """
    raw = _as_raw(instruction)
    text = _TRAILING_PUNCT.sub('', _POLITE_PREFIX.sub('', raw.text.strip()))

    for name, pattern in FALLBACK_PATTERNS:
        match = pattern.match(text)
        if not match:
            continue
        content = _clean_content(match.group('content'))
        objects = match.group('objects').strip()
        if not content or not objects:
            continue
        logger.debug("Instruction %r split by pattern %s", raw.text, name)
        return ParsedInstruction(stylized_content=content, stylized_objects=objects)

    raise NoMatchError(f"No split pattern matches instruction {raw.text!r}")


def make_llm_parser(
    endpoint: EndpointConfig,
    transport: Optional[httpx.BaseTransport] = None
) -> Parser:
    """Parser that asks the endpoint and extracts the JSON answer."""
    def parse(instruction: RawInstruction) -> ParsedInstruction:
        response = query_llm(endpoint, build_prompt(instruction), transport=transport)
        return parse_llm_response(response)
    return parse


JUDGE_TEMPLATE = (
    'An image stylization instruction was split into the style to apply and the '
    'object to stylize.\nInstruction: "{text}"\nStylized Content: "{content}"\n'
    'Stylized Objects: "{objects}"\nRate the split from 0 (wrong) to 10 (perfect). '
    'Reply with the number only.'
)
_NUMBER = re.compile(r'-?\d+(?:\.\d+)?')


def judge_split(
    endpoint: EndpointConfig,
    instruction: RawInstruction,
    parsed: ParsedInstruction,
    transport: Optional[httpx.BaseTransport] = None
) -> float:
    """
    Ask a judge model to rate a split on a 0-10 scale.

    Returns:
        The first number in the judge's reply, clamped to [0, 10]

    Raises:
        EndpointError: If the endpoint fails
        InstructionParseError: If the reply contains no number
    """
    prompt = JUDGE_TEMPLATE.format(
        text=_as_raw(instruction).text,
        content=parsed.stylized_content,
        objects=parsed.stylized_objects,
    )
    client = LLMClient(endpoint, transport=transport)
    reply = client.complete(build_messages(prompt, system="You grade instruction splits."))
    match = _NUMBER.search(reply)
    if not match:
        raise InstructionParseError(f"Judge reply has no score: {reply[:80]!r}")
    return min(10.0, max(0.0, float(match.group())))


def evaluate_corpus(
    corpus: Sequence[Tuple[RawInstruction, ParsedInstruction]],
    parser: Parser,
    judge: Optional[Judge] = None
) -> EvalReport:
    """
    Score a parser by exact match against gold splits.

    Parser failures count as non-matches. With a judge, every successful
    prediction is also scored and the mean is reported.

    Raises:
        InvalidInputError: If the corpus is empty
    """
    if not corpus:
        raise InvalidInputError("Evaluation corpus is empty")

    items: List[EvalItem] = []
    for instruction, gold in corpus:
        raw = _as_raw(instruction)
        try:
            predicted = parser(raw)
            error = None
        except StylizeError as exc:
            predicted, error = None, str(exc)
            logger.info("Parser failed on %r: %s", raw.text, exc)

        item = EvalItem(
            instruction=raw.text,
            gold=gold,
            predicted=predicted,
            matched=predicted is not None and predicted.matches(gold),
            error=error,
        )
        if judge is not None and predicted is not None:
            try:
                item.judge_score = judge(raw, predicted)
            except StylizeError as exc:
                logger.warning("Judge failed on %r: %s", raw.text, exc)
        items.append(item)

    scores = [i.judge_score for i in items if i.judge_score is not None]
    return EvalReport(
        total=len(items),
        exact_matches=sum(1 for i in items if i.matched),
        per_item=items,
        judge_mean=sum(scores) / len(scores) if scores else None,
    )


def load_gold_corpus(path: str) -> List[Tuple[RawInstruction, ParsedInstruction]]:
    """
    Read a JSON-lines gold corpus with keys instruction, stylized_content,
    stylized_objects.

    Raises:
        ConfigurationError: If the file cannot be read
        InvalidInputError: On malformed lines or missing keys
    """
    try:
        records = read_jsonl(path)
    except OSError as exc:
        raise ConfigurationError(f"Cannot read corpus {path}: {exc}") from exc
    except ValueError as exc:
        raise InvalidInputError(str(exc)) from exc

    corpus = []
    for number, record in enumerate(records, start=1):
        try:
            corpus.append((
                RawInstruction(record['instruction']),
                ParsedInstruction(record['stylized_content'], record['stylized_objects']),
            ))
        except KeyError as exc:
            raise InvalidInputError(f"{path}: record {number} lacks {exc.args[0]}") from exc
    return corpus


def iter_fallback_successes(
    corpus: Iterable[Tuple[RawInstruction, ParsedInstruction]]
) -> Iterable[Tuple[RawInstruction, ParsedInstruction]]:
    """(instruction, fallback split) for every corpus entry the fallback handles."""
    for instruction, _ in corpus:
        try:
            yield instruction, fallback_split(instruction)
        except NoMatchError:
            continue
