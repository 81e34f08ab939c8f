"""Shot-noise traffic models and LRU cache performance: analytics and simulation."""

from .config import (CacheNode, CacheTopology, ConfigError, ContentClass, IngressModel, TrafficConfig,
                     single_class)
from .profiles import PopularityProfile
from .volumes import InfiniteMomentError, VolumeDistribution
from .che import CheModel, CheSolution
from .tracegen import RequestTrace, VirtualTimeWarp, generate, shuffle_k_slices, warp
from .sim import (FilterPolicy, LruCache, Replication, SimResult, UnreachableTargetError, replicate,
                  required_cache_size, simulate_single, simulate_tree)

__version__ = "0.1.0"
