"""Sentence generation from recognized events and track statistics."""

from .lexicon import Lexicon, LexiconError, load_lexicon, parse_template
from .planner import (NounPhrase, PlanningError, ReferenceContext, SentencePlan, build_np,
                      plan_sentence, realize)
from .stats import (DEFAULT_THRESHOLDS, ActionThresholds, ClassStatistics, ClassStats,
                    ParticipantDescription, StabilityThresholds, describe_track,
                    fit_action_thresholds, fit_class_statistics)
from .words import (color_adjective, select_adjunct, select_adverb, size_shape_adjectives,
                    static_spatial_pp)

__all__ = [
    "ActionThresholds", "ClassStatistics", "ClassStats", "DEFAULT_THRESHOLDS", "Lexicon",
    "LexiconError", "NounPhrase", "ParticipantDescription", "PlanningError",
    "ReferenceContext", "SentencePlan", "StabilityThresholds", "build_np", "color_adjective",
    "describe_track", "fit_action_thresholds", "fit_class_statistics", "load_lexicon",
    "parse_template", "plan_sentence", "realize", "select_adjunct", "select_adverb",
    "size_shape_adjectives", "static_spatial_pp",
]
