# Copyright 2026 The Gauntlet Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python access to the gauntlet challenge platform."""

import io
import os
import zipfile

from gauntlet._gauntlet import (
    Client,
    GauntletError,
    Server,
    TransportError,
    error_codes,
    format_timestamp,
    http_status,
    merge_results,
    parse_timestamp,
    plan_chunks,
)
from gauntlet._gauntlet import lint as _lint

__all__ = [
    "Client",
    "GauntletError",
    "Server",
    "TransportError",
    "error_codes",
    "format_timestamp",
    "http_status",
    "lint",
    "merge_results",
    "parse_timestamp",
    "plan_chunks",
    "zip_directory",
]


def zip_directory(path):
    """Zips a bundle directory in memory, members relative to path."""
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for root, _, files in os.walk(path):
            for name in sorted(files):
                full = os.path.join(root, name)
                zf.write(full, os.path.relpath(full, path))
    return buf.getvalue()


def lint(bundle):
    """Lints a bundle given as zip bytes, a zip path or a directory."""
    if isinstance(bundle, (bytes, bytearray)):
        return _lint(bytes(bundle))
    if os.path.isdir(bundle):
        return _lint(zip_directory(bundle))
    with open(bundle, "rb") as f:
        return _lint(f.read())
