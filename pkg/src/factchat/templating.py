"""Minimal prompt-template language: ``{{ var }}`` substitution,
``{% for %}``/``{% endfor %}`` loops, ``{% if %}``/``{% else %}``/``{% endif %}``
conditionals, and ``{# comment #}``.

Variable paths are dotted identifiers with optional integer indexing
(``dlg[0].user_utterance``). There are no filters, macros, includes or
arithmetic. Rendering of this subset is byte-compatible with the Jinja2
interpreter configured with default block trimming and kept trailing
newlines; the conformance suite pins that with golden files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Any, Mapping, Sequence, Union

PROMPT_NAMES = (
    "user-simulator",
    "query-generation",
    "summarization",
    "baseline",
    "claim-splitting",
    "verification",
    "draft-response",
    "refine",
    "judge",
)

_TAG_OPEN = re.compile(r"\{\{|\{%|\{#")
_PATH_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*|\[-?\d+\])*$")
_STEP_RE = re.compile(r"\.([A-Za-z_][A-Za-z0-9_]*)|\[(-?\d+)\]")


class TemplateError(Exception):
    """Base class for template failures."""


class TemplateSyntaxError(TemplateError):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class UnresolvedVariable(TemplateError):
    def __init__(self, path: str) -> None:
        super().__init__(f"unresolved variable: {path}")
        self.path = path


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class Subst:
    path: str


@dataclass(frozen=True)
class For:
    var: str
    path: str
    body: tuple["Node", ...]


@dataclass(frozen=True)
class If:
    path: str
    then: tuple["Node", ...]
    orelse: tuple["Node", ...]


Node = Union[Literal, Subst, For, If]


@dataclass(frozen=True)
class Template:
    source: str
    nodes: tuple[Node, ...]

    def render(self, context: Mapping[str, Any], strict: bool = True) -> str:
        return render(self, context, strict=strict)


def _line_col(source: str, pos: int) -> tuple[int, int]:
    line = source.count("\n", 0, pos) + 1
    col = pos - (source.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _check_path(path: str, source: str, pos: int) -> str:
    path = path.strip()
    if not _PATH_RE.match(path):
        raise TemplateSyntaxError(f"invalid variable path {path!r}", *_line_col(source, pos))
    return path


def parse_template(source: str) -> Template:
    """Parse template source into an AST; raises TemplateSyntaxError on
    unbalanced or unknown tags (with line/column)."""
    root: list[Node] = []
    # Stack frames: (nodes-being-filled, opener) where opener describes the
    # enclosing block for unbalanced-tag reporting.
    stack: list[tuple[list[Node], str, int]] = []
    nodes = root
    pos = 0
    n = len(source)

    while pos < n:
        m = _TAG_OPEN.search(source, pos)
        if m is None:
            nodes.append(Literal(source[pos:]))
            break
        if m.start() > pos:
            nodes.append(Literal(source[pos:m.start()]))
        opener = m.group(0)
        tag_start = m.start()

        if opener == "{#":
            end = source.find("#}", m.end())
            if end < 0:
                raise TemplateSyntaxError("unterminated comment", *_line_col(source, tag_start))
            pos = end + 2
            continue

        if opener == "{{":
            end = source.find("}}", m.end())
            if end < 0:
                raise TemplateSyntaxError("unterminated substitution", *_line_col(source, tag_start))
            path = _check_path(source[m.end():end], source, tag_start)
            nodes.append(Subst(path))
            pos = end + 2
            continue

        # {% ... %}
        end = source.find("%}", m.end())
        if end < 0:
            raise TemplateSyntaxError("unterminated tag", *_line_col(source, tag_start))
        inner = source[m.end():end].strip()
        pos = end + 2
        keyword = inner.split(None, 1)[0] if inner else ""

        if keyword == "for":
            m2 = re.fullmatch(r"for\s+([A-Za-z_][A-Za-z0-9_]*)\s+in\s+(.+)", inner)
            if not m2:
                raise TemplateSyntaxError(f"malformed for tag {inner!r}", *_line_col(source, tag_start))
            var, path = m2.group(1), _check_path(m2.group(2), source, tag_start)
            body: list[Node] = []
            nodes.append(For(var, path, ()))  # placeholder, patched at endfor
            stack.append((nodes, "for", tag_start))
            nodes = body
        elif keyword == "if":
            m2 = re.fullmatch(r"if\s+(.+)", inner)
            if not m2:
                raise TemplateSyntaxError(f"malformed if tag {inner!r}", *_line_col(source, tag_start))
            path = _check_path(m2.group(1), source, tag_start)
            nodes.append(If(path, (), ()))
            stack.append((nodes, "if", tag_start))
            nodes = []
        elif keyword == "else":
            if not stack or stack[-1][1] not in ("if", "else"):
                raise TemplateSyntaxError("else outside of if", *_line_col(source, tag_start))
            parent, kind, opened_at = stack.pop()
            if kind == "else":
                raise TemplateSyntaxError("duplicate else", *_line_col(source, tag_start))
            node = parent[-1]
            assert isinstance(node, If)
            parent[-1] = If(node.path, tuple(nodes), ())
            stack.append((parent, "else", opened_at))
            nodes = []
        elif keyword == "endif":
            if not stack or stack[-1][1] not in ("if", "else"):
                raise TemplateSyntaxError("endif without matching if", *_line_col(source, tag_start))
            parent, kind, _ = stack.pop()
            node = parent[-1]
            assert isinstance(node, If)
            if kind == "if":
                parent[-1] = If(node.path, tuple(nodes), ())
            else:
                parent[-1] = If(node.path, node.then, tuple(nodes))
            nodes = parent
        elif keyword == "endfor":
            if not stack or stack[-1][1] != "for":
                raise TemplateSyntaxError("endfor without matching for", *_line_col(source, tag_start))
            parent, _, _ = stack.pop()
            node = parent[-1]
            assert isinstance(node, For)
            parent[-1] = For(node.var, node.path, tuple(nodes))
            nodes = parent
        else:
            raise TemplateSyntaxError(f"unknown tag keyword {keyword!r}", *_line_col(source, tag_start))

    if stack:
        _, kind, opened_at = stack[-1]
        raise TemplateSyntaxError(f"unclosed {kind} block", *_line_col(source, opened_at))
    return Template(source, tuple(root))


def _resolve(path: str, context: Mapping[str, Any], strict: bool) -> Any:
    head_match = re.match(r"[A-Za-z_][A-Za-z0-9_]*", path)
    assert head_match is not None
    head = head_match.group(0)
    if head not in context:
        if strict:
            raise UnresolvedVariable(path)
        return None
    value: Any = context[head]
    for step in _STEP_RE.finditer(path, head_match.end()):
        attr, index = step.group(1), step.group(2)
        if attr is not None:
            if isinstance(value, Mapping) and attr in value:
                value = value[attr]
            elif hasattr(value, attr):
                value = getattr(value, attr)
            elif strict:
                raise UnresolvedVariable(path)
            else:
                return None
        else:
            i = int(index)
            if isinstance(value, Sequence) and not isinstance(value, (str, bytes)) and -len(value) <= i < len(value):
                value = value[i]
            elif strict:
                raise UnresolvedVariable(path)
            else:
                return None
    return value


def _render_nodes(nodes: tuple[Node, ...], context: dict[str, Any], strict: bool, out: list[str]) -> None:
    for node in nodes:
        if isinstance(node, Literal):
            out.append(node.text)
        elif isinstance(node, Subst):
            value = _resolve(node.path, context, strict)
            out.append("" if (value is None and not strict) else str(value))
        elif isinstance(node, If):
            branch = node.then if _resolve(node.path, context, strict) else node.orelse
            _render_nodes(branch, context, strict, out)
        else:
            items = _resolve(node.path, context, strict)
            if items is None:
                items = []
            scoped = dict(context)
            for item in items:
                scoped[node.var] = item
                _render_nodes(node.body, scoped, strict, out)


def render(template: Template, context: Mapping[str, Any], strict: bool = True) -> str:
    """Render a parsed template. In strict mode any unresolved path raises
    UnresolvedVariable; in lenient mode missing values become empty/false."""
    out: list[str] = []
    _render_nodes(template.nodes, dict(context), strict, out)
    return "".join(out)


def load_prompt(name: str) -> Template:
    """Load and parse a named prompt asset shipped with the package."""
    if name not in PROMPT_NAMES:
        raise KeyError(f"unknown prompt asset {name!r}; expected one of {PROMPT_NAMES}")
    source = resources.files("factchat").joinpath(f"assets/prompts/{name}.prompt").read_text("utf-8")
    return parse_template(source)
