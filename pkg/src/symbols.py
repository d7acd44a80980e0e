"""
Symbol Library Module
Built-in schematic templates for every physical node class
"""

import logging
from enum import Enum
from typing import Dict, List, Sequence, Tuple

from PIL import ImageDraw
from pydantic import BaseModel, Field, model_validator

from .errors import SymbolLibraryError
from .graph_model import BBox, NodeClass, PHYSICAL_CLASSES

logger = logging.getLogger(__name__)

UnitPoint = Tuple[float, float]


class PrimitiveKind(str, Enum):
    POLYLINE = "polyline"
    POLYGON = "polygon"
    ELLIPSE = "ellipse"


class Primitive(BaseModel):
    """
    One drawing primitive in unit-box coordinates

    polyline/polygon: points are vertices; ellipse: two points, the bounding corners
    """

    kind: PrimitiveKind
    points: List[UnitPoint]
    filled: bool = False

    @model_validator(mode="after")
    def _inside_unit_box(self) -> "Primitive":
        for x, y in self.points:
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise ValueError(f"primitive point ({x}, {y}) outside the unit box")
        if self.kind == PrimitiveKind.ELLIPSE and len(self.points) != 2:
            raise ValueError("ellipse needs exactly two corner points")
        if self.kind != PrimitiveKind.ELLIPSE and len(self.points) < 2:
            raise ValueError(f"{self.kind.value} needs at least two points")
        return self


class SymbolTemplate(BaseModel):
    name: str
    cls: NodeClass
    primitives: List[Primitive] = Field(min_length=1)
    nominal_size: Tuple[float, float]


# nominal (w, h) in px per class
NOMINAL_SIZES: Dict[NodeClass, Tuple[float, float]] = {
    NodeClass.VALVE: (40.0, 24.0),
    NodeClass.PUMP: (44.0, 44.0),
    NodeClass.INSTRUMENTATION: (36.0, 36.0),
    NodeClass.GENERAL: (64.0, 40.0),
    NodeClass.TANK: (56.0, 96.0),
    NodeClass.ARROW: (28.0, 18.0),
    NodeClass.INLET_OUTLET: (48.0, 24.0),
}


def _poly(*points: UnitPoint, filled: bool = False) -> Primitive:
    return Primitive(kind=PrimitiveKind.POLYGON, points=list(points), filled=filled)


def _line(*points: UnitPoint) -> Primitive:
    return Primitive(kind=PrimitiveKind.POLYLINE, points=list(points))


def _ellipse(x1: float, y1: float, x2: float, y2: float, filled: bool = False) -> Primitive:
    return Primitive(kind=PrimitiveKind.ELLIPSE, points=[(x1, y1), (x2, y2)], filled=filled)


def _builtin_primitives() -> Dict[str, Tuple[NodeClass, List[Primitive]]]:
    return {
        "valve_bowtie": (NodeClass.VALVE, [_poly((0, 0), (1, 1), (1, 0), (0, 1))]),
        "valve_bowtie_stem": (NodeClass.VALVE, [
            _poly((0, 0.2), (1, 1), (1, 0.2), (0, 1)),
            _line((0.5, 0.6), (0.5, 0)),
        ]),
        "valve_globe": (NodeClass.VALVE, [
            _poly((0, 0), (1, 1), (1, 0), (0, 1)),
            _ellipse(0.4, 0.35, 0.6, 0.65, filled=True),
        ]),
        "pump_chord": (NodeClass.PUMP, [_ellipse(0, 0, 1, 1), _line((0.5, 0), (1, 0.5))]),
        "pump_triangle": (NodeClass.PUMP, [
            _ellipse(0, 0, 1, 1),
            _poly((0.3, 0.25), (0.8, 0.5), (0.3, 0.75)),
        ]),
        "instrument_circle": (NodeClass.INSTRUMENTATION, [
            _ellipse(0, 0, 1, 1), _line((0, 0.5), (1, 0.5)),
        ]),
        "instrument_square": (NodeClass.INSTRUMENTATION, [
            _poly((0, 0), (1, 0), (1, 1), (0, 1)), _ellipse(0.05, 0.05, 0.95, 0.95),
        ]),
        "general_box": (NodeClass.GENERAL, [_poly((0, 0), (1, 0), (1, 1), (0, 1))]),
        "general_double": (NodeClass.GENERAL, [
            _poly((0, 0), (1, 0), (1, 1), (0, 1)),
            _poly((0.1, 0.15), (0.9, 0.15), (0.9, 0.85), (0.1, 0.85)),
        ]),
        "tank_capsule": (NodeClass.TANK, [
            _ellipse(0, 0, 1, 0.3),
            _ellipse(0, 0.7, 1, 1),
            _line((0, 0.15), (0, 0.85)),
            _line((1, 0.15), (1, 0.85)),
        ]),
        "tank_flat": (NodeClass.TANK, [
            _ellipse(0, 0, 1, 0.3),
            _poly((0, 0.15), (1, 0.15), (1, 1), (0, 1)),
        ]),
        "arrow_solid": (NodeClass.ARROW, [_poly((0, 0), (1, 0.5), (0, 1), filled=True)]),
        "arrow_open": (NodeClass.ARROW, [_line((0, 0), (1, 0.5), (0, 1)), _line((0, 0.5), (1, 0.5))]),
        "io_homeplate": (NodeClass.INLET_OUTLET, [_poly((0, 0), (0.7, 0), (1, 0.5), (0.7, 1), (0, 1))]),
        "io_double": (NodeClass.INLET_OUTLET, [
            _poly((0, 0), (0.7, 0), (1, 0.5), (0.7, 1), (0, 1)),
            _line((0.2, 0), (0.2, 1)),
        ]),
    }


class SymbolLibrary:
    """Templates grouped by class"""

    def __init__(self, templates: Sequence[SymbolTemplate]):
        self.templates: Dict[NodeClass, List[SymbolTemplate]] = {}
        self.by_name: Dict[str, SymbolTemplate] = {}
        for template in templates:
            self.templates.setdefault(template.cls, []).append(template)
            self.by_name[template.name] = template

    @classmethod
    def builtin(cls) -> "SymbolLibrary":
        """The bundled schematic library, at least two templates per physical class"""
        templates = [
            SymbolTemplate(name=name, cls=node_cls, primitives=prims, nominal_size=NOMINAL_SIZES[node_cls])
            for name, (node_cls, prims) in _builtin_primitives().items()
        ]
        return cls(templates)

    def for_class(self, node_cls: NodeClass) -> List[SymbolTemplate]:
        templates = self.templates.get(node_cls, [])
        if not templates:
            raise SymbolLibraryError(f"no symbol template for class '{node_cls.value}'")
        return templates

    def missing_classes(self) -> List[NodeClass]:
        return [c for c in PHYSICAL_CLASSES if not self.templates.get(c)]

    def draw(self, draw: ImageDraw.ImageDraw, template_name: str, box: BBox, width: int, fill: int = 0) -> None:
        """
        Stroke a template scaled into a box

        Args:
            draw: Pillow drawing context
            template_name: Template to draw
            box: Target box in image coordinates
            width: Stroke width in px
            fill: Ink value
        """
        template = self.by_name.get(template_name)
        if template is None:
            raise SymbolLibraryError(f"unknown symbol template '{template_name}'")

        def scale(point: UnitPoint) -> Tuple[float, float]:
            return (box.x1 + point[0] * box.width, box.y1 + point[1] * box.height)

        for primitive in template.primitives:
            points = [scale(p) for p in primitive.points]
            if primitive.kind == PrimitiveKind.ELLIPSE:
                (x1, y1), (x2, y2) = points
                draw.ellipse([x1, y1, x2, y2], outline=fill, fill=fill if primitive.filled else None, width=width)
            elif primitive.kind == PrimitiveKind.POLYGON:
                draw.polygon(points, outline=fill, fill=fill if primitive.filled else None, width=width)
            else:
                draw.line(points, fill=fill, width=width, joint="curve")
