"""
Named run recipes and golden data for the 16-atom, five-cluster sector
"""

import math
from typing import Dict, List, NamedTuple, Optional, Tuple

from ..exceptions import ConfigError


class FragmentRow(NamedTuple):
    label: str
    pattern: Tuple[int, ...]
    size: int
    initial_state: Optional[str]


def _p(text: str) -> Tuple[int, ...]:
    return tuple(1 if ch == "c" else -1 for ch in text)


FIVE_CLUSTER_TABLE: List[FragmentRow] = [
    FragmentRow("K1", _p("ccccc"), 165, "rggggrggggrggggr"),
    FragmentRow("K2", _p("cccnn"), 45, None),
    FragmentRow("K3", _p("ccncn"), 45, None),
    FragmentRow("K4", _p("ccnnc"), 45, None),
    FragmentRow("K5", _p("cnccn"), 45, None),
    FragmentRow("K6", _p("cncnc"), 45, "rgggggrggrgggggr"),
    FragmentRow("K7", _p("cnncc"), 45, "rgggggrgggrggggr"),
    FragmentRow("K8", _p("ncccn"), 45, "grggggrggrggggrg"),
    FragmentRow("K9", _p("nccnc"), 45, "grggggrggggrgggr"),
    FragmentRow("K10", _p("ncncc"), 45, "grggggrgggrggggr"),
    FragmentRow("K11", _p("nnccc"), 45, "grgggrggggrggggr"),
    FragmentRow("K12", _p("cnnnn"), 9, None),
    FragmentRow("K13", _p("ncnnn"), 9, None),
    FragmentRow("K14", _p("nncnn"), 9, "grgggrggggrgggrg"),
    FragmentRow("K15", _p("nnncn"), 9, "grgggrgggggrggrg"),
    FragmentRow("K16", _p("nnnnc"), 9, "grgggrgggggrgggr"),
]

Z5_STATE = "rggggrggggrggggr"
Z3_STATE = "rggrggrggrggrggr"
BOUNDARY_CHARGES_STATE = "ggggggrggrgggggg"

# Recipe name -> (command, overrides on top of RunConfig defaults)
_RECIPES: Dict[str, Tuple[str, dict]] = {
    "sector-table": ("fragments", {"chain": {"n_atoms": 16}, "sector": 5}),
    "fig2a-lgt": ("quench", {"model": "lgt", "initial_states": [Z5_STATE], "n_steps": 101,
                             "t_max_us": 20.0 / (2 * math.pi * 1.39)}),
    "fig2a-pxq": ("quench", {"model": "pxq", "full_space": True, "initial_states": [Z5_STATE], "n_steps": 101,
                             "t_max_us": 20.0 / (2 * math.pi * 1.39)}),
    "fig2b": ("quench", {"model": "ryd",
                         "initial_states": [FIVE_CLUSTER_TABLE[9].initial_state, FIVE_CLUSTER_TABLE[10].initial_state],
                         "n_steps": 41, "t_max_us": 5.6 / (2 * math.pi * 1.39)}),
    "fig3a": ("quench", {"model": "lgt", "initial_states": [BOUNDARY_CHARGES_STATE], "n_steps": 101,
                         "t_max_us": 10.0 / (2 * math.pi * 1.39)}),
    "fig3b": ("quench", {"model": "lgt", "initial_states": [Z3_STATE], "n_steps": 101,
                         "t_max_us": 10.0 / (2 * math.pi * 1.39)}),
    "fig4b": ("ensemble", {"initial_states": [FIVE_CLUSTER_TABLE[5].initial_state], "require_complete": False}),
    "fig4c": ("ensemble", {"sector": 5}),
    "fig4d": ("scaling", {"sweep": list(range(50, 201, 10)), "scaling": ["bulk", "boundary"]}),
    "ext6": ("fragments", {"chain": {"n_atoms": 16}, "sweep": list(range(10, 41))}),
    "ext7": ("scaling", {"sweep": list(range(90, 451, 30)), "scaling": ["center"], "collapse": True,
                         "peak_ratio_n": 550}),
    "ext8": ("quench", {"model": "disordered", "initial_states": [FIVE_CLUSTER_TABLE[10].initial_state],
                        "window": {"omega_t_start": 7.0, "omega_t_stop": 14.0, "n_steps": 36},
                        "disorder": {"sigma_r": 0.083, "realizations": 10}, "compare_clean": True,
                        "n_steps": 2, "t_max_us": 14.0 / (2 * math.pi * 1.39)}),
    "ext9": ("ensemble", {"sector": 5, "spam_enabled": True, "postselect": {"blockade": True}}),
    "ext9-nc": ("ensemble", {"sector": 5, "spam_enabled": True, "postselect": {"blockade": True, "n_c": 5}}),
}


def recipe_names() -> List[str]:
    return sorted(_RECIPES)


def recipe_command(name: str) -> str:
    if name not in _RECIPES:
        raise ConfigError(f"unknown recipe '{name}'; available: {', '.join(recipe_names())}")
    return _RECIPES[name][0]


def recipe_overrides(name: str) -> dict:
    recipe_command(name)
    _, overrides = _RECIPES[name]
    return {"chain": {"n_atoms": 16}, **overrides}


def five_cluster_initial_states() -> List[str]:
    return [row.initial_state for row in FIVE_CLUSTER_TABLE if row.initial_state]


def five_cluster_label(pattern: Tuple[int, ...]) -> Optional[str]:
    for row in FIVE_CLUSTER_TABLE:
        if row.pattern == tuple(pattern):
            return row.label
    return None
