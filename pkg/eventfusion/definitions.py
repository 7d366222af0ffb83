"""
Definition-file language for sensors, features, events and objects.

    sensor radar
    feature v from radar
    event a1_v on v : [0, 10)
    object o2 := a1_v and a2_r
    object c3 := not (o1 or o2)     # earlier objects are inlined

'and' binds tighter than 'or', 'not' binds tightest, '#' starts a comment.
A feature may list several sensors (`feature s from seismic, acoustic`);
bounds may be signed and the lower bound may be `-inf`.
"""
import re
import warnings
from dataclasses import dataclass, field

from .errors import ParseError, RangeOverlapWarning
from .probability_model import (
    And,
    Atom,
    Event,
    EventSpace,
    Interval,
    Not,
    ObjectDefinition,
    Or,
    format_bound,
)
from .system_logger import SystemLogger, syslog

KEYWORDS = frozenset({'sensor', 'feature', 'from', 'event', 'on', 'object', 'and', 'or', 'not'})

# Guards the recursive descent against pathological nesting
MAX_NESTING = 200

_TOKEN_RE = re.compile(r"""
    (?P<WS>[ \t\r\f\v]+)
  | (?P<NEWLINE>\n)
  | (?P<COMMENT>\#[^\n]*)
  | (?P<NUM>-?(?:inf\b|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<PUNCT>:=|[:\[\],()])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    line: int
    column: int


@dataclass(frozen=True)
class FeatureDecl:
    feature_id: str
    sensor_ids: tuple
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class EventDecl:
    event_id: str
    feature_id: str
    interval: Interval
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class DefinitionFile:
    sensors: tuple = ()
    features: tuple = ()
    events: tuple = ()
    objects: tuple = ()

    def feature(self, feature_id):
        for f in self.features:
            if f.feature_id == feature_id:
                return f
        raise KeyError(feature_id)

    def events_on(self, feature_id):
        return tuple(e for e in self.events if e.feature_id == feature_id)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

def tokenize(source):
    """Split source text into tokens, ending with an EOF token."""
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise ParseError(line, pos - line_start + 1, ParseError.LEX,
                             f"unexpected character {source[pos]!r}")
        kind = match.lastgroup
        text = match.group()
        column = pos - line_start + 1
        if kind == 'NEWLINE':
            line += 1
            line_start = match.end()
        elif kind == 'NUM':
            tokens.append(Token('NUM', float(text), line, column))
        elif kind == 'IDENT':
            tokens.append(Token('KEYWORD' if text in KEYWORDS else 'IDENT', text, line, column))
        elif kind == 'PUNCT':
            tokens.append(Token(text, text, line, column))
        pos = match.end()
    tokens.append(Token('EOF', None, line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, source):
        self.tokens = tokenize(source)
        self.pos = 0
        self.depth = 0
        self.sensors = {}
        self.features = {}
        self.events = {}
        self.objects = {}

    # --- token helpers ---

    @property
    def current(self):
        return self.tokens[self.pos]

    def _describe(self, token):
        if token.kind == 'EOF':
            return 'end of input'
        return repr(token.value) if token.kind != 'NUM' else f"number {format_bound(token.value)}"

    def error(self, token, kind, message):
        return ParseError(token.line, token.column, kind, message)

    def advance(self):
        token = self.tokens[self.pos]
        if token.kind != 'EOF':
            self.pos += 1
        return token

    def expect(self, kind, value=None, what=None):
        token = self.current
        if token.kind != kind or (value is not None and token.value != value):
            wanted = what or repr(value if value is not None else kind)
            raise self.error(token, ParseError.SYNTAX, f"expected {wanted}, found {self._describe(token)}")
        return self.advance()

    def at_keyword(self, word):
        return self.current.kind == 'KEYWORD' and self.current.value == word

    # --- statements ---

    def parse_file(self):
        while self.current.kind != 'EOF':
            token = self.current
            if token.kind != 'KEYWORD' or token.value not in ('sensor', 'feature', 'event', 'object'):
                raise self.error(token, ParseError.SYNTAX,
                                 f"expected a declaration, found {self._describe(token)}")
            getattr(self, f"parse_{token.value}")()
        return DefinitionFile(
            sensors=tuple(self.sensors),
            features=tuple(self.features.values()),
            events=tuple(self.events.values()),
            objects=tuple(self.objects.values()),
        )

    def _declare(self, table, token, category):
        if token.value in table:
            raise self.error(token, ParseError.DUPLICATE, f"{category} {token.value!r} declared twice")

    def parse_sensor(self):
        self.expect('KEYWORD', 'sensor')
        name = self.expect('IDENT', what='a sensor name')
        self._declare(self.sensors, name, 'sensor')
        self.sensors[name.value] = name

    def parse_feature(self):
        self.expect('KEYWORD', 'feature')
        name = self.expect('IDENT', what='a feature name')
        self._declare(self.features, name, 'feature')
        self.expect('KEYWORD', 'from')
        sensor_ids = [self._sensor_ref()]
        while self.current.kind == ',':
            self.advance()
            sensor_ids.append(self._sensor_ref())
        if len(set(sensor_ids)) != len(sensor_ids):
            raise self.error(name, ParseError.DUPLICATE, f"feature {name.value!r} lists a sensor twice")
        self.features[name.value] = FeatureDecl(name.value, tuple(sensor_ids), name.line, name.column)

    def _sensor_ref(self):
        token = self.expect('IDENT', what='a sensor name')
        if token.value not in self.sensors:
            raise self.error(token, ParseError.RESOLUTION, f"undeclared sensor {token.value!r}")
        return token.value

    def parse_event(self):
        self.expect('KEYWORD', 'event')
        name = self.expect('IDENT', what='an event name')
        self._declare(self.events, name, 'event')
        if name.value in self.objects:
            raise self.error(name, ParseError.DUPLICATE,
                             f"event {name.value!r} has the same name as an object")
        self.expect('KEYWORD', 'on')
        feature = self.expect('IDENT', what='a feature name')
        if feature.value not in self.features:
            raise self.error(feature, ParseError.RESOLUTION, f"undeclared feature {feature.value!r}")
        self.expect(':')
        bracket = self.expect('[')
        lower = self.expect('NUM', what='a lower bound').value
        self.expect(',')
        upper = self.expect('NUM', what="an upper bound or 'inf'").value
        self.expect(')', what="')' (ranges are closed-open)")
        try:
            interval = Interval(lower, upper)
        except ValueError as e:
            raise self.error(bracket, ParseError.SYNTAX, f"invalid range for {name.value!r}: {e}") from None
        self.events[name.value] = EventDecl(name.value, feature.value, interval, name.line, name.column)

    def parse_object(self):
        self.expect('KEYWORD', 'object')
        name = self.expect('IDENT', what='an object name')
        self._declare(self.objects, name, 'object')
        if name.value in self.events:
            raise self.error(name, ParseError.DUPLICATE,
                             f"object {name.value!r} has the same name as an event")
        self.expect(':=')
        formula = self.parse_expr()
        self.objects[name.value] = ObjectDefinition(name.value, formula)

    # --- expressions ---

    def _nest(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise self.error(self.current, ParseError.SYNTAX, "expression nested too deeply")

    def parse_expr(self):
        self._nest()
        terms = [self.parse_term()]
        while self.at_keyword('or'):
            self.advance()
            terms.append(self.parse_term())
        self.depth -= 1
        return terms[0] if len(terms) == 1 else Or(tuple(terms))

    def parse_term(self):
        factors = [self.parse_factor()]
        while self.at_keyword('and'):
            self.advance()
            factors.append(self.parse_factor())
        return factors[0] if len(factors) == 1 else And(tuple(factors))

    def parse_factor(self):
        token = self.current
        if self.at_keyword('not'):
            self.advance()
            self._nest()
            child = self.parse_factor()
            self.depth -= 1
            return Not(child)
        if token.kind == '(':
            self.advance()
            inner = self.parse_expr()
            self.expect(')')
            return inner
        if token.kind == 'IDENT':
            self.advance()
            if token.value in self.events:
                return Atom(token.value)
            if token.value in self.objects:
                return self.objects[token.value].formula
            raise self.error(token, ParseError.RESOLUTION, f"undefined identifier {token.value!r}")
        raise self.error(token, ParseError.SYNTAX,
                         f"expected an event, object, 'not' or '(', found {self._describe(token)}")


def parse(source):
    """
    Parse definition-file text.

    Returns:
        DefinitionFile: Declarations in source order, with object references
                        inlined into later formulas.

    Raises:
        ParseError: At the earliest failing position.
    """
    return _Parser(source).parse_file()


def parse_file(path):
    with open(path, encoding='utf-8') as fh:
        return parse(fh.read())


# ---------------------------------------------------------------------------
# Checks and resolution
# ---------------------------------------------------------------------------

def validate_ranges(d):
    """
    Warn about events on one feature whose ranges intersect.

    Events are treated as mutually exclusive atoms whatever their ranges say,
    so overlaps are reported, never rejected.

    Returns:
        list of str: One message per overlapping pair.
    """
    messages = []
    for feature in d.features:
        events = d.events_on(feature.feature_id)
        for i, first in enumerate(events):
            for second in events[i + 1:]:
                if first.interval.intersects(second.interval):
                    message = (f"events {first.event_id!r} {first.interval} and {second.event_id!r} "
                               f"{second.interval} on feature {feature.feature_id!r} overlap")
                    messages.append(message)
                    syslog.warning(SystemLogger.DSL, f"validate_ranges: {message}")
                    warnings.warn(message, RangeOverlapWarning, stacklevel=2)
    return messages


def _bind(formula, bindings):
    if isinstance(formula, Atom):
        if formula.label not in bindings:
            raise ParseError(0, 0, ParseError.RESOLUTION, f"undefined identifier {formula.label!r}")
        feature_id, index = bindings[formula.label]
        return Atom(formula.label, feature_id, index)
    if isinstance(formula, And):
        return And(tuple(_bind(c, bindings) for c in formula.children))
    if isinstance(formula, Or):
        return Or(tuple(_bind(c, bindings) for c in formula.children))
    if isinstance(formula, Not):
        return Not(_bind(formula.child, bindings))
    raise TypeError(f"not a formula node: {formula!r}")


def resolve(d):
    """
    Build one EventSpace per feature and bind every formula atom.

    Returns:
        tuple: (list of EventSpace, list of ObjectDefinition with bound atoms)

    Raises:
        ParseError: Resolution error for an undeclared feature or event, or a
                    feature without events.
    """
    spaces = []
    bindings = {}
    declared = {f.feature_id for f in d.features}
    for event in d.events:
        if event.feature_id not in declared:
            raise ParseError(event.line, event.column, ParseError.RESOLUTION,
                             f"event {event.event_id!r} refers to undeclared feature {event.feature_id!r}")

    for feature in d.features:
        events = d.events_on(feature.feature_id)
        if not events:
            raise ParseError(feature.line, feature.column, ParseError.RESOLUTION,
                             f"feature {feature.feature_id!r} declares no events")
        spaces.append(EventSpace(
            feature.feature_id,
            ','.join(feature.sensor_ids),
            tuple(Event(e.event_id, e.interval) for e in events),
        ))
        for index, event in enumerate(events):
            bindings[event.event_id] = (feature.feature_id, index)

    objects = [ObjectDefinition(obj.object_id, _bind(obj.formula, bindings)) for obj in d.objects]
    syslog.debug(SystemLogger.DSL, "resolve: definitions resolved", {
        'spaces': len(spaces),
        'objects': [o.object_id for o in objects],
    })
    return spaces, objects


def class_partition(objects, default_complement='complement'):
    """
    Split objects into fusion classes and the complement class.

    An object written as `not (o1 or ... or oI)` over all the other objects,
    in order, names the complement class instead of being fused as an object.

    Returns:
        tuple: (list of ObjectDefinition, complement label)
    """
    objects = list(objects)
    for candidate in objects:
        others = [o for o in objects if o is not candidate]
        if not others:
            continue
        formulas = tuple(o.formula for o in others)
        union = formulas[0] if len(formulas) == 1 else Or(formulas)
        if candidate.formula == Not(union):
            return others, candidate.object_id
    return objects, default_complement


def sensor_features(d):
    """Mapping sensor_id -> feature ids it observes, in declaration order."""
    mapping = {sensor: [] for sensor in d.sensors}
    for feature in d.features:
        for sensor in feature.sensor_ids:
            mapping.setdefault(sensor, []).append(feature.feature_id)
    return mapping


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

_PRECEDENCE = {Or: 1, And: 2, Not: 3, Atom: 4}


def format_formula(formula):
    """Render a formula with the fewest parentheses that keep its structure."""
    if isinstance(formula, Atom):
        return formula.label
    if isinstance(formula, Not):
        child = format_formula(formula.child)
        if _PRECEDENCE[type(formula.child)] < _PRECEDENCE[Not]:
            child = f"({child})"
        return f"not {child}"
    op = 'and' if isinstance(formula, And) else 'or'
    own = _PRECEDENCE[type(formula)]
    parts = []
    for child in formula.children:
        text = format_formula(child)
        if _PRECEDENCE[type(child)] <= own:
            text = f"({text})"
        parts.append(text)
    if len(parts) == 1:
        # One-operand And/Or has no concrete syntax of its own
        return parts[0]
    return f" {op} ".join(parts)


def format_definitions(d):
    """Render a DefinitionFile as parseable text."""
    lines = [f"sensor {s}" for s in d.sensors]
    lines += [f"feature {f.feature_id} from {', '.join(f.sensor_ids)}" for f in d.features]
    lines += [f"event {e.event_id} on {e.feature_id} : {e.interval}" for e in d.events]
    lines += [f"object {o.object_id} := {format_formula(o.formula)}" for o in d.objects]
    return '\n'.join(lines) + '\n'

