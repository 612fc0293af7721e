"""Knowledge tracing and retrieval-augmented tutoring."""

import json

from ._core import (
    BktParams,
    EmptyDocumentError,
    KnowledgeBase,
    UndefinedAucError,
    auc,
    bkt_update,
    eval_kt as _eval_kt,
    mastery_sequence,
    simulate,
    train_kt,
)
from . import _core

__all__ = [
    "ApiError",
    "BktParams",
    "EmptyDocumentError",
    "KnowledgeBase",
    "TutorService",
    "UndefinedAucError",
    "auc",
    "bkt_update",
    "eval_kt",
    "mastery_sequence",
    "simulate",
    "train_kt",
]


class ApiError(Exception):
    """A failed service call, carrying the HTTP status and error code."""

    def __init__(self, status, code, message):
        super().__init__(f"{status} {code}: {message}")
        self.status = status
        self.code = code
        self.message = message


def eval_kt(checkpoint, data, truth=None):
    return json.loads(_eval_kt(str(checkpoint), str(data), None if truth is None else str(truth)))


class TutorService:
    """In-process service over a data directory; methods mirror the REST API."""

    def __init__(self, data_dir):
        self._impl = _core.Service(str(data_dir))

    def _call(self, op, student="", body=None, k=3):
        status, text = self._impl.call(op, student, json.dumps(body) if body is not None else "", k)
        payload = json.loads(text)
        if status != 200:
            raise ApiError(status, payload["code"], payload["message"])
        return payload

    def ingest(self, *, url=None, title=None, text=None):
        body = {"url": url} if url is not None else {"title": title, "text": text}
        return self._call("ingest", body=body)

    def record_interaction(self, student_id, question_id, skill_id, correct, timestamp):
        body = {"question_id": question_id, "skill_id": skill_id, "correct": correct, "timestamp": timestamp}
        return self._call("interaction", student_id, body)

    def ask(self, student_id, question, top_k=5, **candidate):
        return self._call("ask", student_id, {"question": question, "top_k": top_k, **candidate})

    def state(self, student_id):
        return self._call("state", student_id)

    def recommendations(self, student_id, k=3):
        return self._call("recommendations", student_id, k=k)

    def health(self):
        return self._call("health")

    def reload(self):
        return self._call("reload")
