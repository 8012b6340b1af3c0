"""Sentence planning: noun phrases, template instantiation and surface strings."""

from __future__ import annotations

from dataclasses import dataclass

from ..classes import is_person
from .lexicon import (ADVERB, ENDOGENOUS, EXOGENOUS, OBJECT, SUBJECT, Lexicon,
                      OptionalGroup)
from .stats import (DEFAULT_THRESHOLDS, ActionThresholds, ClassStatistics,
                    ParticipantDescription, StabilityThresholds)
from .words import (SIZE_WORDS, color_adjective, moving_velocity, select_adjunct,
                    select_adverb, size_shape_adjectives, static_spatial_pp)

ADJECTIVE_ORDER = ("other", "size", "shape", "color", "restrictive")
SWAP_ACTIONS = frozenset({"approached", "fled"})
# entered/exited keep a full object NP only for these containers
ENTERABLE = frozenset({"car", "door", "suv", "truck"})
RECEIVED_FROM = frozenset({"mailbox", "person", "person-crouch", "person-down"})


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class NounPhrase:
    track_id: str | None
    determiner: str | None = None
    adjectives: tuple = ()      # (kind, word) pairs in surface order
    noun: str | None = None
    pronoun: str | None = None
    pp: tuple | None = None     # (preposition, NounPhrase)

    def words(self):
        if self.pronoun is not None:
            return [self.pronoun]
        out = [self.determiner] + [w for _, w in self.adjectives] + [self.noun]
        if self.pp is not None:
            out += [self.pp[0]] + self.pp[1].words()
        return out

    def core(self):
        """Adjectives and noun without "other", the string used for uniqueness."""
        return " ".join([w for k, w in self.adjectives if k != "other"] + [self.noun])


@dataclass(frozen=True)
class SentencePlan:
    action_class: str
    subject: NounPhrase
    object: NounPhrase | None
    adverb: str | None
    adverb_position: str | None     # "preverbal" or "postverbal"
    adjunct: str | None
    adjunct_kind: str | None        # "endogenous" or "exogenous"
    items: tuple                    # words and NounPhrases in surface order


def anaphor(action):
    if action in ("attached", "raised"):
        return "themselves"
    if action == "moved":
        return "itself"
    return "something"


def _sorted(adjs):
    return tuple(sorted(adjs, key=lambda kw: ADJECTIVE_ORDER.index(kw[0])))


class ReferenceContext:
    """Adjective choices for the participants mentioned as full noun phrases.

    ``mentions`` lists track ids in order of first mention; ``pp_referents``
    holds the ids named inside the subject's spatial phrase.
    """

    def __init__(self, descs, mentions, lex: Lexicon, cs: ClassStatistics = None,
                 stability: StabilityThresholds = StabilityThresholds(), pp_referents=()):
        self.descs, self.lex = descs, lex
        self.order = list(dict.fromkeys(mentions))
        self.pp_referents = frozenset(pp_referents)
        self.adjectives = {t: self._base(descs[t], cs, stability) for t in self.order}
        self._disambiguate()

    def _base(self, d: ParticipantDescription, cs, stability):
        out = []
        for w in size_shape_adjectives(d, cs, stability, self.lex.class_size.get(d.object_class)):
            out.append(("size" if w in SIZE_WORDS else "shape", w))
        if not is_person(d.object_class) and d.object_class in self.lex.restrictive:
            out.append(("restrictive", self.lex.restrictive[d.object_class]))
        return out

    def core(self, tid):
        return " ".join([w for k, w in _sorted(self.adjectives[tid]) if k != "other"]
                        + [self.lex.noun(self.descs[tid].object_class)])

    def _clashes(self):
        cores = [self.core(t) for t in self.order]
        return [t for t, c in zip(self.order, cores) if cores.count(c) > 1]

    def _disambiguate(self):
        clash = self._clashes()
        if clash:
            extras = {t: {"color": color_adjective(self.descs[t].hsv),
                          "restrictive": self.descs[t].pose if self.descs[t].pose != "none"
                          else None} for t in clash}
            base = {t: list(self.adjectives[t]) for t in clash}
            for kinds in (("color",), ("restrictive",), ("color", "restrictive")):
                for t in clash:
                    self.adjectives[t] = base[t] + [(k, extras[t][k]) for k in kinds
                                                    if extras[t][k] is not None]
                if not self._clashes():
                    break
            else:
                for t in clash:
                    self.adjectives[t] = base[t]
        seen = set()
        for t in self.order:
            c = self.core(t)
            if c in seen:
                self.adjectives[t].append(("other", "other"))
            seen.add(c)

    def has_other(self, tid):
        return any(k == "other" for k, _ in self.adjectives[tid])

    def unique(self, tid):
        c = self.core(tid)
        return sum(self.core(t) == c for t in self.order) == 1


def build_np(role, desc: ParticipantDescription, ctx: ReferenceContext, pp=None) -> NounPhrase:
    """Full noun phrase for a participant; ``role`` is subject, object or reference."""
    tid = desc.track_id
    if role == "object" and tid in ctx.pp_referents:
        det = "that"
    elif ctx.unique(tid) and not ctx.has_other(tid):
        det = "the"
    else:
        det = "some"
    return NounPhrase(tid, det, _sorted(ctx.adjectives[tid]), ctx.lex.noun(desc.object_class),
                      pp=pp)


def plan_sentence(hyp, parts, lex: Lexicon, th: ActionThresholds = DEFAULT_THRESHOLDS,
                  cs: ClassStatistics = None,
                  stability: StabilityThresholds = StabilityThresholds()) -> SentencePlan:
    """Instantiate the action's template for an event hypothesis.

    ``parts`` maps track ids to :class:`ParticipantDescription`.
    """
    action = hyp.action_class
    template = lex.template(action)
    try:
        agent = parts[hyp.agent]
        patient = parts[hyp.patient] if hyp.arity == 2 else None
    except KeyError as e:
        raise PlanningError(f"no description for track {e.args[0]!r}") from None

    subj, obj = agent, patient
    if (obj is not None and action in SWAP_ACTIONS and agent.mean_speed < th.v1
            and patient.total_displacement > agent.total_displacement):
        subj, obj = patient, agent

    vel = moving_velocity(subj, th.v1)
    speed = float((vel[0] ** 2 + vel[1] ** 2) ** 0.5)
    flat = [t for el in template for t in (el.items if isinstance(el, OptionalGroup) else (el,))]
    adverb = select_adverb(speed, th) if ADVERB in flat else None
    position = None
    if adverb is not None:
        position = "preverbal" if flat.index(ADVERB) == flat.index(SUBJECT) + 1 else "postverbal"
    kind = ("endogenous" if ENDOGENOUS in flat else "exogenous" if EXOGENOUS in flat else None)
    adjunct = select_adjunct(vel, kind, th.v1) if kind else None

    def include(group):
        if group.has_object:
            return obj is not None
        return action == "received" and obj is not None and obj.object_class in RECEIVED_FROM

    used = []
    for el in template:
        if not isinstance(el, OptionalGroup):
            used.append(el)
        elif include(el):
            used.extend(el.items)
    object_pronoun = None
    if OBJECT in used:
        if obj is None:
            object_pronoun = anaphor(action)
        elif action in ("entered", "exited") and obj.object_class not in ENTERABLE:
            object_pronoun = anaphor(action)

    static = (obj is not None and subj.mean_speed < th.v1 and obj.mean_speed < th.v1)
    mentions = [subj.track_id]
    if static:
        mentions.append(obj.track_id)
    if OBJECT in used and object_pronoun is None:
        mentions.append(obj.track_id)
    descs = {subj.track_id: subj}
    if obj is not None:
        descs[obj.track_id] = obj
    ctx = ReferenceContext(descs, mentions, lex, cs, stability,
                           pp_referents=[obj.track_id] if static else ())

    pp = None
    if static:
        pp = (static_spatial_pp(subj.mean_center, obj.mean_center), build_np("reference", obj, ctx))
    subject_np = build_np("subject", subj, ctx, pp)
    object_np = None
    if OBJECT in used:
        object_np = (NounPhrase(obj.track_id if obj else None, pronoun=object_pronoun)
                     if object_pronoun else build_np("object", obj, ctx))

    items = []
    for tok in used:
        if tok == SUBJECT:
            items.append(subject_np)
        elif tok == OBJECT:
            items.append(object_np)
        elif tok == ADVERB:
            if adverb:
                items.append(adverb)
        elif tok in (ENDOGENOUS, EXOGENOUS):
            if adjunct:
                items.append(adjunct)
        else:
            items.append(tok)
    return SentencePlan(action, subject_np, object_np, adverb, position, adjunct,
                        kind if adjunct else None, tuple(items))


def realize(plan: SentencePlan) -> str:
    words = []
    for it in plan.items:
        words.extend(it.words() if isinstance(it, NounPhrase) else it.split())
    text = " ".join(words)
    return text[:1].upper() + text[1:] + "."
