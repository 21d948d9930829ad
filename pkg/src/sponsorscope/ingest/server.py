"""Read-only HTTP fixture that mimics the platform's hashtag and user endpoints.

Pages are ordered newest first (``taken_at`` descending, then ``id``).
Cursors are base64 of ``"<taken_at>:<id>"`` for the last item returned, so
the server keeps no per-client state.
"""

from __future__ import annotations

import base64
import bisect
import json
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

from .records import Dataset, post_to_record, profile_to_record, story_to_record

DEFAULT_LIMIT = 20
MAX_LIMIT = 500


def encode_cursor(taken_at: int, post_id: str) -> str:
    return base64.urlsafe_b64encode(f"{taken_at}:{post_id}".encode()).decode()


def decode_cursor(cursor: str) -> tuple[int, str]:
    raw = base64.urlsafe_b64decode(cursor.encode()).decode()
    ts, _, pid = raw.partition(":")
    return int(ts), pid


def _order_key(post):
    return (-post.taken_at, post.id)


class _Snapshot:
    """Immutable indexes over a Dataset."""

    def __init__(self, ds: Dataset):
        self.profiles = {u: profile_to_record(p) for u, p in ds.profiles.items()}
        by_tag: dict[str, list] = {}
        by_user: dict[str, list] = {u: [] for u in ds.profiles}
        for p in ds.posts:
            for t in p.hashtags:
                by_tag.setdefault(t, []).append(p)
            by_user[p.author].append(p)
        self.by_tag = {t: self._index(ps) for t, ps in by_tag.items()}
        self.by_user = {u: self._index(ps) for u, ps in by_user.items()}
        stories: dict[str, list] = {u: [] for u in ds.profiles}
        for s in sorted(ds.stories, key=_order_key):
            stories[s.author].append(story_to_record(s))
        self.stories = stories

    @staticmethod
    def _index(posts):
        posts = sorted(posts, key=_order_key)
        return [_order_key(p) for p in posts], [post_to_record(p) for p in posts]


def paginate(index, cursor: str | None, limit: int) -> dict:
    keys, items = index
    start = 0
    if cursor:
        ts, pid = decode_cursor(cursor)
        start = bisect.bisect_right(keys, (-ts, pid))
    page = items[start:start + limit]
    end = start + len(page)
    next_cursor = None
    if page and end < len(items):
        last = page[-1]
        next_cursor = encode_cursor(last["taken_at"], last["id"])
    return {"items": page, "next_cursor": next_cursor}


def _make_handler(snap: _Snapshot):
    class Handler(BaseHTTPRequestHandler):
        server_version = "FixtureAPI/1.0"

        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def _send(self, status, body):
            data = json.dumps(body, ensure_ascii=False, separators=(",", ":")).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _error(self, status, msg):
            self._send(status, {"error": msg})

        def do_GET(self):
            url = urlsplit(self.path)
            parts = [unquote(p) for p in url.path.strip("/").split("/")]
            query = parse_qs(url.query)
            cursor = query.get("cursor", [None])[0]
            try:
                limit = int(query.get("limit", [DEFAULT_LIMIT])[0])
            except ValueError:
                return self._error(HTTPStatus.BAD_REQUEST, "limit must be an integer")
            if not 1 <= limit <= MAX_LIMIT:
                return self._error(HTTPStatus.BAD_REQUEST, f"limit must be in [1, {MAX_LIMIT}]")
            try:
                if len(parts) == 3 and parts[0] == "hashtag" and parts[2] == "media":
                    index = snap.by_tag.get(parts[1].lower().lstrip("#"), ([], []))
                    return self._send(HTTPStatus.OK, paginate(index, cursor, limit))
                if len(parts) >= 2 and parts[0] == "user":
                    user = parts[1]
                    if user not in snap.profiles:
                        return self._error(HTTPStatus.NOT_FOUND, f"unknown user {user}")
                    if len(parts) == 2:
                        return self._send(HTTPStatus.OK, snap.profiles[user])
                    if len(parts) == 3 and parts[2] == "media":
                        return self._send(HTTPStatus.OK, paginate(snap.by_user[user], cursor, limit))
                    if len(parts) == 3 and parts[2] == "stories":
                        return self._send(HTTPStatus.OK, snap.stories[user])
            except (ValueError, UnicodeDecodeError):
                return self._error(HTTPStatus.BAD_REQUEST, "bad cursor")
            return self._error(HTTPStatus.NOT_FOUND, "no such endpoint")

    return Handler


class FixtureServer:
    """Handle for a running fixture API; use as a context manager or call close()."""

    def __init__(self, dataset: Dataset, host: str = "127.0.0.1", port: int = 0):
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(_Snapshot(dataset)))
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, args=(0.05,), daemon=True)
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def close(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join()

    def wait(self):
        self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep:
        raise ValueError(f"bind address must look like host:port, got {bind!r}")
    return host or "127.0.0.1", int(port)


def serve_fixture_api(dataset: Dataset, bind: str = "127.0.0.1:0") -> FixtureServer:
    """Start serving ``dataset`` in a background thread.

    Raises OSError if the address cannot be bound.
    """
    dataset.validate()
    host, port = parse_bind(bind)
    return FixtureServer(dataset, host, port)
