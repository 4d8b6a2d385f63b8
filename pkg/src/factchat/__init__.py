"""Knowledge-grounded chatbot engine: a seven-stage retrieve / generate /
fact-check / refine pipeline over a passage corpus, with a simulation-based
evaluation harness."""

__version__ = "0.1.0"

from .model import (
    Claim,
    ConversationState,
    DialogueTurn,
    EngineConfig,
    EvidenceBullet,
    FeedbackScores,
    Passage,
    PassageDate,
    PipelineTrace,
    QueryIntent,
    StageOutcome,
    Verdict,
    deserialize_trace,
    serialize_trace,
    validate_config,
    validate_trace,
)
from .pipeline import BaselineResponder, ChatEngine, StageError

__all__ = [
    "BaselineResponder",
    "ChatEngine",
    "Claim",
    "ConversationState",
    "DialogueTurn",
    "EngineConfig",
    "EvidenceBullet",
    "FeedbackScores",
    "Passage",
    "PassageDate",
    "PipelineTrace",
    "QueryIntent",
    "StageError",
    "StageOutcome",
    "Verdict",
    "deserialize_trace",
    "serialize_trace",
    "validate_config",
    "validate_trace",
]
