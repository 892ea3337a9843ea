"""Flat ``key = value`` configuration files.

Files are UTF-8, one entry per line, ``#`` starts a comment, and (for the
pipeline config only) ``[section]`` lines open a new section. Every problem
is collected as a Diagnostic with its line number so a user sees all of
them in one pass.
"""

import dataclasses
import logging
import os
import typing
from dataclasses import dataclass

from urducorpus.errors import ConfigValidationError, InputError
from urducorpus.fileio import read_text

logger = logging.getLogger(__name__)

ROOT_SECTION = ''

_TRUE = {'true', 'yes', 'on', '1'}
_FALSE = {'false', 'no', 'off', '0'}


@dataclass(frozen=True)
class Entry:
    section: str
    key: str
    value: str
    line: int


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str

    def __str__(self):
        if self.line:
            return f"line {self.line}: {self.message}"
        return self.message


@dataclass(frozen=True)
class Field:
    kind: str = 'str'
    required: bool = False
    default: typing.Any = None


def parse_entries(text, allow_sections=False):
    """Split config text into entries; returns (entries, diagnostics)"""
    entries = []
    diagnostics = []
    section = ROOT_SECTION
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if line.startswith('[') and line.endswith(']'):
            if not allow_sections:
                diagnostics.append(Diagnostic(number, f"sections are not allowed here: {line}"))
                continue
            section = line[1:-1].strip()
            continue
        if '=' not in line:
            diagnostics.append(Diagnostic(number, f"expected 'key = value', got '{line}'"))
            continue
        key, value = line.split('=', 1)
        key = key.strip()
        if not key:
            diagnostics.append(Diagnostic(number, "empty key"))
            continue
        entries.append(Entry(section, key, value.strip(), number))
    return entries, diagnostics


def coerce(value, kind):
    """Convert a raw string to the schema type, raising ValueError on mismatch"""
    if kind == 'str' or kind == 'path':
        return value
    if kind == 'bool':
        lowered = value.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got '{value}'")
    if kind == 'int':
        cleaned = value.replace('_', '')
        try:
            return int(cleaned)
        except ValueError:
            try:
                number = float(cleaned)
            except ValueError:
                raise ValueError(f"expected an integer, got '{value}'")
            if not number.is_integer():
                raise ValueError(f"expected an integer, got '{value}'")
            return int(number)
    if kind == 'float':
        try:
            return float(value.replace('_', ''))
        except ValueError:
            raise ValueError(f"expected a number, got '{value}'")
    if kind == 'list':
        return [item.strip() for item in value.split(',') if item.strip()]
    raise ValueError(f"unknown field kind '{kind}'")


def validate(entries, schema):
    """Check entries against ``{section: {key: Field}}``.

    Returns (values, diagnostics) where values maps each section in the
    schema to its typed values, defaults filled in.
    """
    values = {section: {} for section in schema}
    seen = {}
    diagnostics = []
    for entry in entries:
        where = f"[{entry.section}] " if entry.section else ''
        if entry.section not in schema:
            diagnostics.append(Diagnostic(entry.line, f"unknown section '{entry.section}'"))
            continue
        fields = schema[entry.section]
        if entry.key not in fields:
            diagnostics.append(Diagnostic(entry.line, f"unknown key {where}'{entry.key}'"))
            continue
        slot = (entry.section, entry.key)
        if slot in seen:
            diagnostics.append(Diagnostic(
                entry.line, f"duplicate key {where}'{entry.key}' (first set on line {seen[slot]})"))
            continue
        seen[slot] = entry.line
        try:
            values[entry.section][entry.key] = coerce(entry.value, fields[entry.key].kind)
        except ValueError as e:
            diagnostics.append(Diagnostic(entry.line, f"{where}'{entry.key}': {e}"))
    for section, fields in schema.items():
        for key, field in fields.items():
            if key in values[section] or (section, key) in seen:
                continue
            if field.required:
                where = f"[{section}] " if section else ''
                diagnostics.append(Diagnostic(0, f"missing required key {where}'{key}'"))
            else:
                values[section][key] = field.default
    return values, diagnostics


def load_sections(path, schema, allow_sections=True):
    """Parse and validate a config file, raising with every diagnostic"""
    text = read_text(path)
    entries, diagnostics = parse_entries(text, allow_sections=allow_sections)
    values, more = validate(entries, schema)
    diagnostics.extend(more)
    if diagnostics:
        raise ConfigValidationError(path, diagnostics)
    return values


def load_flat(path, fields):
    return load_sections(path, {ROOT_SECTION: fields}, allow_sections=False)[ROOT_SECTION]


_KINDS = {int: 'int', float: 'float', bool: 'bool', str: 'str'}


def dataclass_schema(cls):
    """Derive a Field schema from a dataclass' annotated fields"""
    hints = typing.get_type_hints(cls)
    schema = {}
    for f in dataclasses.fields(cls):
        kind = _KINDS.get(hints[f.name], 'str')
        has_default = f.default is not dataclasses.MISSING
        schema[f.name] = Field(kind=kind, required=not has_default,
                               default=f.default if has_default else None)
    return schema


def load_dataclass(cls, source, presets=None):
    """Build ``cls`` from a preset name or a flat config file path"""
    presets = presets or {}
    if source in presets:
        logger.debug(f"Using preset '{source}' for {cls.__name__}")
        return presets[source]
    if not os.path.isfile(source):
        known = ', '.join(sorted(presets)) or 'none'
        raise InputError(f"{cls.__name__} config not found: {source} (presets: {known})")
    values = load_flat(source, dataclass_schema(cls))
    return cls(**values)
