"""
(c) 2024 pyroomnav contributors
Licensed under the MIT license: https://www.opensource.org/licenses/mit-license.php

JSON-over-HTTP reasoner client.

Request: ``POST <url>/decide`` with
``{"version": 1, "variant": ..., "payload": {...}, "goal": {...}}``.
Reply: ``{"decision": ..., "rationale": ...}``.
"""

import requests

from roomnav.reasoners import BaseReasoner
from roomnav.util import DEBUG_FLAGS, get_credentials_for_url, write, write_error

PROTOCOL_VERSION = 1

SWITCH_WORDS = {"switch", "true", "yes", "1"}
STAY_WORDS = {"stay", "false", "no", "0"}


class RemoteReplyError(ValueError):
    """Raised when a reply does not match the expected schema."""


class RemoteReasoner(BaseReasoner):
    """Forward every query to a remote endpoint; fall back on any failure.

    Fallbacks: early-stop -> False, room query -> nearest uncovered room,
    room label -> UNLABELED, attribute and relation -> UNKNOWN.

    Args:
        url (str): endpoint base URL (without credentials)
        priors (PriorsTable): used for fallbacks only
        timeout (float): per-call timeout (seconds)
        opts (dict): `no_keyring`, `no_netrc`, `verbose`
    """

    def __init__(self, url, priors, *, timeout=10.0, opts=None, session=None):
        super().__init__(priors)
        self.url = url.rstrip("/")
        self.decide_url = self.url + "/decide"
        self.timeout = timeout
        self.opts = opts = opts or {}
        creds = get_credentials_for_url(self.url, opts)
        self.session = session or requests.Session()
        if creds:
            self.session.auth = creds
        self.failures = 0

    def __repr__(self):
        return f"RemoteReasoner<{self.url}>"

    def remote_call(self, ctx):
        """POST a context and return the raw `decision` value.

        Raises:
            requests.RequestException, RemoteReplyError
        """
        body = {
            "version": PROTOCOL_VERSION,
            "variant": ctx.variant,
            "payload": ctx.to_payload(),
            "goal": ctx.goal.to_dict() if ctx.goal is not None else None,
        }
        resp = self.session.post(self.decide_url, json=body, timeout=self.timeout)
        resp.raise_for_status()
        try:
            reply = resp.json()
        except ValueError as e:
            raise RemoteReplyError(f"Malformed JSON reply: {e}") from e
        if not isinstance(reply, dict) or "decision" not in reply:
            raise RemoteReplyError(f"Reply has no `decision`: {reply!r}")
        if "reasoner" in DEBUG_FLAGS:
            write(
                f"remote {ctx.variant}: {reply['decision']!r} ({reply.get('rationale')})",
                debug=True,
            )
        return reply["decision"]

    def _call(self, ctx, parse):
        try:
            return parse(self.remote_call(ctx), ctx)
        except (requests.RequestException, RemoteReplyError) as e:
            self.failures += 1
            res = self.fallback(ctx)
            write_error(f"Remote reasoner {ctx.variant} failed ({e}); using {res!r}")
            return res

    # --- Reply parsers ---

    @staticmethod
    def _parse_bool(decision, ctx):
        if isinstance(decision, bool):
            return decision
        word = str(decision).strip().lower()
        if word in SWITCH_WORDS:
            return True
        elif word in STAY_WORDS:
            return False
        raise RemoteReplyError(f"Expected a boolean decision, got {decision!r}")

    @staticmethod
    def _parse_room(decision, ctx):
        ids = {r["id"] for r in ctx.rooms}
        try:
            rid = int(decision)
        except (TypeError, ValueError) as e:
            raise RemoteReplyError(f"Expected a room id, got {decision!r}") from e
        if rid not in ids:
            raise RemoteReplyError(f"Room {rid} is not an uncovered room {sorted(ids)}")
        return rid

    @staticmethod
    def _parse_str(decision, ctx):
        if not isinstance(decision, str) or not decision:
            raise RemoteReplyError(f"Expected a label, got {decision!r}")
        return decision

    # --- Contract ---

    def decide_early_stop(self, ctx):
        return self._call(ctx, self._parse_bool)

    def select_room(self, ctx):
        if not ctx.rooms:
            return self.nearest_room(ctx)
        return self._call(ctx, self._parse_room)

    def classify_room(self, ctx):
        return self._call(ctx, self._parse_str)

    def infer_attributes(self, ctx):
        return self._call(ctx, self._parse_str)

    def check_relation(self, ctx):
        return self._call(ctx, self._parse_bool)
