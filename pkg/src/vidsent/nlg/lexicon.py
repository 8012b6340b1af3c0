"""Word maps and sentence templates.

Template strings use a small notation: ``X`` and ``Y`` are the subject and
object slots, ``[...]`` is an optional group, ``{Adv}`` marks where an adverb
goes and ``{PPendo}`` / ``{PPexo}`` mark the direction adjunct slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from ..classes import ACTION_CLASSES, OBJECT_CLASSES

SUBJECT, OBJECT = "X", "Y"
ADVERB = "{Adv}"
ENDOGENOUS, EXOGENOUS = "{PPendo}", "{PPexo}"
SLOTS = (SUBJECT, OBJECT, ADVERB, ENDOGENOUS, EXOGENOUS)


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class OptionalGroup:
    items: tuple

    @property
    def has_object(self):
        return OBJECT in self.items


def parse_template(text):
    """Split a template into a tuple of tokens and :class:`OptionalGroup` groups."""
    out, group = [], None
    for raw in text.split():
        tok = raw
        opens, closes = tok.startswith("["), tok.endswith("]")
        tok = tok.strip("[]")
        if opens:
            if group is not None:
                raise LexiconError(f"nested optional group in {text!r}")
            group = []
        if tok:
            (group if group is not None else out).append(tok)
        if closes:
            if group is None:
                raise LexiconError(f"unbalanced ']' in {text!r}")
            out.append(OptionalGroup(tuple(group)))
            group = None
    if group is not None:
        raise LexiconError(f"unclosed optional group in {text!r}")
    flat = [t for x in out for t in (x.items if isinstance(x, OptionalGroup) else (x,))]
    if flat.count(SUBJECT) != 1:
        raise LexiconError(f"template needs exactly one subject slot: {text!r}")
    return tuple(out)


@dataclass(frozen=True)
class Lexicon:
    nouns: dict
    restrictive: dict
    class_size: dict
    templates: dict

    def __post_init__(self):
        missing = [c for c in OBJECT_CLASSES if c not in self.nouns]
        if missing:
            raise LexiconError(f"no noun for {missing}")
        missing = [a for a in ACTION_CLASSES if a not in self.templates]
        if missing:
            raise LexiconError(f"no template for {missing}")
        for t in self.templates.values():
            parse_template(t)

    def noun(self, object_class):
        try:
            return self.nouns[object_class]
        except KeyError:
            raise LexiconError(f"no noun for object class {object_class!r}") from None

    def template(self, action):
        try:
            return parse_template(self.templates[action])
        except KeyError:
            raise LexiconError(f"no template for action class {action!r}") from None

    @classmethod
    def from_json(cls, rec):
        return cls(dict(rec["nouns"]), dict(rec["restrictive"]), dict(rec["classSize"]),
                   dict(rec["templates"]))

    def to_json(self):
        return {"nouns": self.nouns, "restrictive": self.restrictive,
                "classSize": self.class_size, "templates": self.templates}


def load_lexicon(path=None) -> Lexicon:
    """Read a lexicon file; without a path the packaged English lexicon is used."""
    if path is None:
        text = resources.files(__package__).joinpath("lexicon.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return Lexicon.from_json(json.loads(text))
