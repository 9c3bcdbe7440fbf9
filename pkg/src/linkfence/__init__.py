"""linkfence: a referrer-aware filtering proxy that meters link exfiltration.

The proxy extracts the links statically embedded in every fetched page,
auto-allows them while charging each distinct followed external link against
an exact information budget, asks the operator about everything else, and
injects a guard script that defeats pop-up/frame cookie smuggling.
"""
from .engine import FilterEngine, PageContext, ProxyAction, ProxyRequest
from .leakage import distinct_values, leakage_bits, max_requests_within

__version__ = "0.1.0"

__all__ = [
    "FilterEngine",
    "PageContext",
    "ProxyAction",
    "ProxyRequest",
    "distinct_values",
    "leakage_bits",
    "max_requests_within",
    "__version__",
]
