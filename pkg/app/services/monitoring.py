import os
import sys
import time
import logging
from collections import Counter, defaultdict
from enum import Enum
from functools import wraps
from typing import Any, Dict, List, Optional

from services.formula_core import EagError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)

# Sentry stays off unless SENTRY_DSN is set
try:
    import sentry_sdk
except ImportError:
    sentry_sdk = None


def init_error_tracking() -> bool:
    """Start Sentry when a DSN is configured; returns whether reports will be sent."""
    global sentry_sdk
    dsn = os.getenv("SENTRY_DSN")
    if sentry_sdk is None or not dsn:
        sentry_sdk = None
        return False
    sentry_sdk.init(
        dsn=dsn,
        traces_sample_rate=0.1,
        environment=os.getenv("ENVIRONMENT", "development"),
        release=os.getenv("RELEASE_VERSION", "0.1.0"),
    )
    logger.info("Sentry initialized")
    return True


def configure_logging(level: str) -> None:
    """Log to stderr at ``level``; stdout carries verdicts only."""
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))


def _outcome(result: Any) -> Optional[str]:
    status = getattr(result, "status", result)
    return status.value if isinstance(status, Enum) else None


class MonitoringService:
    """Errors, events and per-procedure timings of one process"""

    def __init__(self):
        self.logger = logger
        self.timings: Dict[str, List[float]] = defaultdict(list)
        self.outcomes: Counter = Counter()

    def track_error(self, error: Exception, context: Dict[str, Any] = None) -> None:
        if sentry_sdk:
            with sentry_sdk.push_scope() as scope:
                for key, value in (context or {}).items():
                    scope.set_extra(key, value)
                sentry_sdk.capture_exception(error)
        self.logger.error(f"Unexpected {type(error).__name__}: {error} {context or ''}", exc_info=True)

    def track_event(self, event_name: str, data: Dict[str, Any] = None) -> None:
        if sentry_sdk:
            sentry_sdk.capture_message(event_name, level="info")
        self.logger.info(f"{event_name}: {data or {}}")

    def track_performance(self, operation: str, duration_ms: float, metadata: Dict[str, Any] = None) -> None:
        metadata = metadata or {}
        self.timings[operation].append(duration_ms)
        self.outcomes[(operation, metadata.get("outcome", "ok"))] += 1
        self.logger.debug(f"{operation} took {duration_ms:.1f}ms {metadata}")

    def summary(self) -> List[str]:
        """One line per procedure: calls, total time and outcome counts."""
        lines = []
        for operation in sorted(self.timings):
            runs = self.timings[operation]
            counts = ", ".join(
                f"{outcome} {n}" for (op, outcome), n in sorted(self.outcomes.items()) if op == operation
            )
            lines.append(f"{operation}: {len(runs)} call(s), {sum(runs):.1f}ms total ({counts})")
        return lines


def error_handler(func):
    """Report unexpected exceptions; input and budget errors pass through with a debug line."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except EagError as e:
            logger.debug(f"{func.__name__} rejected its input: {type(e).__name__}: {e}")
            raise
        except Exception as e:
            monitoring.track_error(e, {"function": func.__name__, "args": str(args)[:200]})
            raise
    return wrapper


def performance_monitor(operation_name: str):
    """Time a decision procedure and record how it ended."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            outcome, success = "interrupted", False
            try:
                result = func(*args, **kwargs)
            except EagError as e:
                outcome, success = type(e).__name__, False
                raise
            except Exception:
                outcome, success = "error", False
                raise
            else:
                outcome, success = _outcome(result) or "ok", True
                return result
            finally:
                monitoring.track_performance(operation_name, (time.perf_counter() - start) * 1000, {
                    "function": func.__name__,
                    "success": success,
                    "outcome": outcome,
                })
        return wrapper
    return decorator


monitoring = MonitoringService()
