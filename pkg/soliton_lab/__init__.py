import importlib.metadata as _metadata
import importlib.resources as _resources
import sys as _sys

if (_sys.version_info.major, _sys.version_info.minor) < (3, 9):
    # Can't be tested, as our test harness is using python3.9+.
    raise Exception("Requires python3.9+")  # pragma: no cover


try:
    __version__ = _metadata.version('soliton-lab')
except _metadata.PackageNotFoundError:
    __version__ = '0.0.0development'

try:
    __commit__ = (
        _resources.files('soliton_lab').joinpath('soliton_lab_git_version.txt').read_text('utf-8')
    )
    __commit__ = __commit__[:7]
except FileNotFoundError:
    __commit__ = 'unknown'
