"""HTTP determine-location endpoint.

Every request builds its own world from the scenario, so concurrent requests
share nothing but the immutable config.
"""
import json
import threading
from dataclasses import dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..locator import LocalizationError
from ..protocol import InputData, PeriodicEventInfo, ProtocolError, UnknownUeError, lmf_run_procedure
from .scenario import build_world

DETERMINE_LOCATION_PATH = "/nlmf-loc/v1/determine-location"
DEFAULT_PORT = 8080


class BadRequest(ValueError):
    pass


def input_data_from_json(raw):
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BadRequest(f"body is not JSON: {exc}") from None
    if not isinstance(doc, dict) or "supi" not in doc:
        raise BadRequest("InputData must be an object with a 'supi' field")
    unknown = set(doc) - {"supi", "ncgi", "periodic_event_info"}
    if unknown:
        raise BadRequest(f"unknown InputData fields: {sorted(unknown)}")
    try:
        pei = doc.get("periodic_event_info")
        if pei is not None:
            pei = PeriodicEventInfo(int(pei["amount"]), float(pei["interval_s"]))
        return InputData(str(doc["supi"]), doc.get("ncgi"), pei)
    except (KeyError, TypeError, ValueError) as exc:
        raise BadRequest(f"invalid InputData: {exc}") from None


def location_data_to_json(loc):
    cart = loc.cartesian
    doc = {
        "relative_cartesian_location": None if cart is None else {"x": cart.x, "y": cart.y, "z": cart.z},
        "geographical_coordinates": None,
    }
    if loc.geographic is not None:
        lat, lon, alt = loc.geographic
        doc["geographical_coordinates"] = {"lat": lat, "lon": lon, "alt": alt}
    return doc


def locate_ue(cfg, input_data):
    """Library-level entry shared by the service and its tests."""
    loc, _ = lmf_run_procedure(input_data, build_world(cfg))
    return loc


def _handler_for(cfg):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):
            pass

        def _reply(self, status, doc):
            body = json.dumps(doc).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path.rstrip("/") != DETERMINE_LOCATION_PATH:
                return self._reply(HTTPStatus.NOT_FOUND, {"cause": "RESOURCE_NOT_FOUND"})
            raw = self.rfile.read(int(self.headers.get("Content-Length") or 0))
            try:
                loc = locate_ue(cfg, input_data_from_json(raw))
            except BadRequest as exc:
                return self._reply(HTTPStatus.BAD_REQUEST, {"cause": "INVALID_MSG_FORMAT", "detail": str(exc)})
            except UnknownUeError as exc:
                return self._reply(HTTPStatus.NOT_FOUND, {"cause": "CONTEXT_NOT_FOUND", "detail": str(exc)})
            except (ProtocolError, LocalizationError) as exc:
                return self._reply(
                    HTTPStatus.INTERNAL_SERVER_ERROR,
                    {"cause": "POSITIONING_FAILED", "detail": f"{type(exc).__name__}: {exc}"},
                )
            self._reply(HTTPStatus.OK, location_data_to_json(loc))

        def do_GET(self):
            self._reply(HTTPStatus.METHOD_NOT_ALLOWED, {"cause": "METHOD_NOT_ALLOWED"})

    return Handler


@dataclass
class RunningService:
    server: ThreadingHTTPServer
    thread: threading.Thread

    @property
    def port(self):
        return self.server.server_address[1]

    @property
    def url(self):
        host = self.server.server_address[0]
        return f"http://{host}:{self.port}{DETERMINE_LOCATION_PATH}"

    def shutdown(self):
        self.server.shutdown()
        self.server.server_close()
        self.thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def serve_determine_location(cfg, bind_address=("127.0.0.1", DEFAULT_PORT)):
    """Start the service on a background thread.  Port 0 picks a free port."""
    server = ThreadingHTTPServer(bind_address, _handler_for(cfg))
    server.daemon_threads = True
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return RunningService(server, thread)
