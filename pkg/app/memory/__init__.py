from .records import RecordStore
from .limit_cache import LimitConstantCache
