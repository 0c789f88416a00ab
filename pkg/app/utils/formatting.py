import json
import os
from typing import Optional


def safe_truncate(text: Optional[str], length: int = 240) -> str:
    if not text:
        return ""
    if len(text) <= length:
        return text
    return text[: max(0, length - 1)] + "…"


def format_fragment(fragment, plan) -> str:
    """One-line classification, e.g. ``purely-universal, additive, k=2, route: normed-universal``."""
    return f"{fragment.describe()}, {plan.describe()}"


def format_verdict(verdict, *, model_path: Optional[str] = None) -> str:
    lines = [
        f"status: {verdict.status.value}",
        f"theory: {verdict.theory}",
        f"fragment: {verdict.fragment.describe()}",
        f"route: {verdict.route.value}",
    ]
    if verdict.citation:
        lines.append(f"citation: {verdict.citation}")
    if verdict.dimensions:
        lines.append(f"dimensions: {verdict.dimensions}")
    if model_path:
        lines.append(f"model: {model_path}")
    elif verdict.model:
        lines.append("model:")
        lines += ["  " + line for line in verdict.model.rstrip("\n").splitlines()]
    for note in verdict.notes:
        lines.append(f"note: {safe_truncate(note)}")
    return "\n".join(lines)


def json_line(verdict, *, model_path: Optional[str] = None) -> str:
    """The machine-readable record of a verdict; keys are sorted so output is stable."""
    return json.dumps(verdict.to_record(model_path), sort_keys=True)


SOURCE_WINDOW = 160


def format_syntax_error(text: str, line: int, column: int, message: str) -> str:
    """The offending source line with a caret under the error column.

    Long lines are cut to a window around the column so the caret stays under it.
    """
    lines = text.splitlines()
    source = lines[line - 1] if 0 < line <= len(lines) else ""
    offset = min(max(column - 1, 0), len(source))
    start = 0
    if len(source) > SOURCE_WINDOW:
        start = min(max(0, offset - SOURCE_WINDOW // 2), len(source) - SOURCE_WINDOW + 1)
    shown = source[start:start + SOURCE_WINDOW]
    if start > 0:
        shown, offset = "…" + shown[1:], offset - start
    if start + SOURCE_WINDOW < len(source):
        shown = shown[:-1] + "…"
    return f"{line}:{column}: {message}\n  {shown}\n  {' ' * offset}^"


def model_path_for(input_path: str, out: Optional[str] = None) -> str:
    """``--out`` when given, else the input path with a ``.model`` suffix."""
    if out:
        return out
    root, _ = os.path.splitext(input_path)
    return root + ".model"
