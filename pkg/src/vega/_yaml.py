"""YAML loading shared by search-space and pipeline documents."""

from __future__ import annotations

import re

import yaml

# PyYAML follows YAML 1.1 and reads ``1e-5`` as a string; accept it as a float.
_FLOAT = re.compile(
    r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""",
    re.X,
)


class Loader(yaml.SafeLoader):
    pass


Loader.yaml_implicit_resolvers = {
    k: [(tag, rx) for tag, rx in v if tag != "tag:yaml.org,2002:float"]
    for k, v in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
Loader.add_implicit_resolver("tag:yaml.org,2002:float", _FLOAT, list("-+0123456789."))

# ``(lo, hi)`` tuples inside flow sequences would otherwise be split at the comma.
_TUPLE = re.compile(r"\(\s*([^()\n,'\"]+?)\s*,\s*([^()\n,'\"]+?)\s*\)")


def load(text: str):
    return yaml.load(_TUPLE.sub(r"[\1, \2]", text), Loader=Loader)


def dump(data) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, allow_unicode=True)
