"""Timestamps for journals and logs, overridable for reproducible runs."""

import os
from datetime import datetime, timezone


def now() -> datetime:
    """Current UTC time, pinned when SOURCE_DATE_EPOCH is set.

    Pipeline outputs embed timestamps; honoring SOURCE_DATE_EPOCH keeps
    re-runs byte-identical, same as reproducible-build tooling.
    """
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    return datetime.now(tz=timezone.utc)


def isoformat(dt: datetime) -> str:
    return dt.isoformat(timespec="seconds")
