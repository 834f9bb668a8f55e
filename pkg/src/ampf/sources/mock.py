"""Local HTTP endpoint replaying a series as scrapeable metrics."""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..clock import Clock
from ..errors import DataError
from ..series import MultivariateSeries, series_to_csv, slice_series
from .exposition import render_exposition

STALE_FLAG = "ampf_mock_stale"


class MockEndpoint:
    """Serves the row of ``series`` that ``clock`` currently points at.

    ``GET /metrics`` returns the exposition text; ``GET /metrics?backfill=n``
    returns the last ``n`` rows up to now as CSV. Past the end of the series
    the last row is served along with a ``ampf_mock_stale 1`` line.
    """

    def __init__(self, series: MultivariateSeries, clock: Clock, host: str = "127.0.0.1", port: int = 0):
        if len(series) < 1:
            raise DataError("mock endpoint needs a non-empty series")
        self.series = series
        self.clock = clock
        endpoint = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802
                endpoint._handle(self)

            def log_message(self, format, *args):  # silence stderr access log
                pass

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/metrics"

    def current_index(self) -> tuple[int, bool]:
        raw = int((self.clock.now() - self.series.start_timestamp) // self.series.step)
        last = len(self.series) - 1
        return min(max(raw, 0), last), raw > last

    def _handle(self, req: BaseHTTPRequestHandler) -> None:
        parsed = urlparse(req.path)
        if parsed.path not in ("/", "/metrics"):
            req.send_error(404)
            return
        idx, stale = self.current_index()
        query = parse_qs(parsed.query)
        if "backfill" in query:
            try:
                n = int(query["backfill"][0])
            except ValueError:
                req.send_error(400, "backfill must be an integer")
                return
            if n < 1:
                req.send_error(400, "backfill must be >= 1")
                return
            body = series_to_csv(slice_series(self.series, max(0, idx - n + 1), idx))
            ctype = "text/csv"
        else:
            extra = {STALE_FLAG: 1.0} if stale else None
            body = render_exposition(self.series.metric_names, self.series.values[idx], extra)
            ctype = "text/plain; version=0.0.4"
        data = body.encode()
        req.send_response(200)
        req.send_header("Content-Type", ctype)
        req.send_header("Content-Length", str(len(data)))
        req.end_headers()
        req.wfile.write(data)

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> MockEndpoint:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve_mock(series: MultivariateSeries, clock: Clock, host: str = "127.0.0.1", port: int = 0) -> MockEndpoint:
    return MockEndpoint(series, clock, host, port)
