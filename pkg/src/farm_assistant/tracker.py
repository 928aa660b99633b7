"""Event-sourced conversation state plus the durable per-session store.

A tracker is nothing more than a fold over its event list; the slots map is
maintained incrementally but always equals a replay of the events. The store
journals every event as one JSON line per event to a per-session file and
flushes before returning, so a killed process can rebuild every session.
"""
from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .errors import CorruptEvent

USER_MESSAGE = "user_message"
SLOT_SET = "slot_set"
ACTION_EXECUTED = "action_executed"
BOT_UTTERED = "bot_uttered"

_EVENT_TYPES = {USER_MESSAGE, SLOT_SET, ACTION_EXECUTED, BOT_UTTERED}
_REQUIRED_KEYS = {
    USER_MESSAGE: ("text", "intent", "entities"),
    SLOT_SET: ("name", "value"),
    ACTION_EXECUTED: ("name",),
    BOT_UTTERED: ("text",),
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Event:
    type: str
    payload: dict
    timestamp: str

    def to_dict(self) -> dict:
        return {"type": self.type, "payload": self.payload, "timestamp": self.timestamp}


def user_message(text: str, intent: str, entities: list[dict]) -> Event:
    return Event(USER_MESSAGE, {"text": text, "intent": intent, "entities": entities}, _now())


def slot_set(name: str, value: str) -> Event:
    return Event(SLOT_SET, {"name": name, "value": value}, _now())


def action_executed(name: str) -> Event:
    return Event(ACTION_EXECUTED, {"name": name}, _now())


def bot_uttered(text: str) -> Event:
    return Event(BOT_UTTERED, {"text": text}, _now())


class DialogueTracker:
    """Append-only event list with an incrementally maintained slot map."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self.events: list[Event] = []
        self.slots: dict[str, str] = {}

    def apply(self, event: Event) -> None:
        self.events.append(event)
        if event.type == SLOT_SET:
            self.slots[event.payload["name"]] = event.payload["value"]


def _validate_event(obj: dict, index: int) -> Event:
    try:
        etype = obj["type"]
        payload = obj["payload"]
        timestamp = obj["timestamp"]
    except (TypeError, KeyError):
        raise CorruptEvent(index) from None
    if etype not in _EVENT_TYPES or not isinstance(payload, dict):
        raise CorruptEvent(index)
    for key in _REQUIRED_KEYS[etype]:
        if key not in payload:
            raise CorruptEvent(index)
    return Event(etype, payload, timestamp)


def replay_tracker(events: Iterable[Event | dict], session_id: str = "") -> DialogueTracker:
    """Rebuild a tracker from stored events; dict inputs are validated."""
    tracker = DialogueTracker(session_id)
    for i, ev in enumerate(events):
        if isinstance(ev, dict):
            ev = _validate_event(ev, i)
        tracker.apply(ev)
    return tracker


def _journal_name(session_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]", "", session_id)[:40] or "session"
    digest = hashlib.sha1(session_id.encode("utf-8")).hexdigest()[:10]
    return f"{safe}-{digest}.jsonl"


class SessionStore:
    """Tracker registry with per-session locks and an append-only journal.

    directory=None keeps sessions in memory only (tests, throwaway REPLs).
    """

    def __init__(self, directory: Optional[str | Path] = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._trackers: dict[str, DialogueTracker] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            lock = self._locks.get(session_id)
            if lock is None:
                lock = self._locks[session_id] = threading.Lock()
            return lock

    def _journal_path(self, session_id: str) -> Optional[Path]:
        if self.directory is None:
            return None
        return self.directory / _journal_name(session_id)

    def get(self, session_id: str) -> DialogueTracker:
        """Fetch or auto-create; recovers from the journal on first access."""
        with self._registry_lock:
            tracker = self._trackers.get(session_id)
            if tracker is not None:
                return tracker
        path = self._journal_path(session_id)
        if path is not None and path.is_file():
            lines = path.read_text(encoding="utf-8").splitlines()
            raw = []
            for i, line in enumerate(lines):
                if not line.strip():
                    continue
                try:
                    raw.append(json.loads(line))
                except json.JSONDecodeError:
                    raise CorruptEvent(i) from None
            tracker = replay_tracker(raw, session_id)
        else:
            tracker = DialogueTracker(session_id)
        with self._registry_lock:
            return self._trackers.setdefault(session_id, tracker)

    def append(self, session_id: str, events: Iterable[Event]) -> None:
        """Apply to the in-memory tracker and journal with a flush."""
        events = list(events)
        tracker = self.get(session_id)
        for ev in events:
            tracker.apply(ev)
        path = self._journal_path(session_id)
        if path is not None and events:
            with path.open("a", encoding="utf-8") as fh:
                for ev in events:
                    fh.write(json.dumps(ev.to_dict(), ensure_ascii=False) + "\n")
                fh.flush()

    def session_ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._trackers)
