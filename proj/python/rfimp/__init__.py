"""Multiple imputation by chained random forests with out-of-bag error draws."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
