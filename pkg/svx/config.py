"""JSON run configuration whose keys mirror the long command-line flags."""
import json
import keyword
import os

from svx import ConfigError, MissingFileError


SCHEMA = 'svx-config/1'


def _key(name):
    key = name.replace('-', '_')
    return key + '_' if keyword.iskeyword(key) else key


def _keys(mapping):
    return dict((_key(name), value) for name, value in mapping.items())


def _reject(source, where, unknown):
    if unknown:
        raise ConfigError('{}: unknown keys {}: {}'.format(source, where, ', '.join(sorted(unknown))))


def parse_config(data, command, options, source='<config>'):
    """Values for ``command`` from a parsed config document.

    ``options`` maps every subcommand to the option names it accepts. Keys
    may sit at the top level or in a section named after a subcommand;
    section values override top-level ones. Top-level keys apply to the
    commands that know them and must be known to at least one. Sections
    must name a subcommand and hold only that subcommand's keys.
    """
    if not isinstance(data, dict):
        raise ConfigError('{}: top level must be an object'.format(source))
    if data.get('schema') != SCHEMA:
        raise ConfigError('{}: expected "schema": "{}", got {!r}'.format(source, SCHEMA, data.get('schema')))
    if command not in options:
        raise ConfigError('{}: no options are known for "{}"'.format(source, command))

    flat = {}
    sections = {}
    for name, value in data.items():
        if name == 'schema':
            continue
        if isinstance(value, dict):
            if name not in options:
                raise ConfigError('{}: section "{}" is not a subcommand (expected one of: {})'.format(
                    source, name, ', '.join(sorted(options))))
            sections[name] = _keys(value)
        else:
            flat[_key(name)] = value

    _reject(source, 'at the top level', set(flat) - set().union(*options.values()))
    for name, values in sorted(sections.items()):
        _reject(source, 'for "{}"'.format(name), set(values) - set(options[name]))

    known = options[command]
    values = dict((key, value) for key, value in flat.items() if key in known)
    values.update(sections.get(command, {}))
    return values


def load_config(path, command, options):
    if not os.path.exists(path):
        raise MissingFileError(path)
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = json.load(f)
        except ValueError as e:
            raise ConfigError('{}: invalid JSON: {}'.format(path, e))
    return parse_config(data, command, options, path)
