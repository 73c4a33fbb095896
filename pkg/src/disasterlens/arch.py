"""Architecture descriptions: the line-oriented .arch format and shape chaining.

Grammar (one layer per line, ``#`` starts a comment):

    input C H W
    conv F K S P relu|none
    maxpool W S
    flatten
    dense U

The input line must come first.  Conv/maxpool layers form the frozen
backbone and must precede the single flatten; dense layers form the
trainable head and must follow it.  Shapes are chained at parse time so
a malformed stack fails before any weights are touched.

Parameterized layers are named by their position in the layer list:
``<index>.kernels`` / ``<index>.bias`` for conv, ``<index>.weights`` /
``<index>.bias`` for dense.  These names key the weight files.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .tensor import ShapeError, conv_output_size


class ArchError(ValueError):
    """Architecture text is syntactically or structurally invalid."""


@dataclass(frozen=True)
class ConvLayer:
    filters: int
    kernel: int
    stride: int
    pad: int
    activation: str  # "relu" or "none"


@dataclass(frozen=True)
class MaxPoolLayer:
    window: int
    stride: int


@dataclass(frozen=True)
class FlattenLayer:
    pass


@dataclass(frozen=True)
class DenseLayer:
    units: int


Layer = ConvLayer | MaxPoolLayer | FlattenLayer | DenseLayer


@dataclass(frozen=True)
class WeightSlot:
    """One parameter tensor the architecture expects: name, shape, frozen flag."""

    name: str
    shape: tuple[int, ...]
    frozen: bool


class ArchitectureSpec:
    """Validated layer stack with per-layer output shapes."""

    def __init__(self, input_shape: tuple[int, int, int], layers: list[Layer]):
        self.input_shape = tuple(int(d) for d in input_shape)
        self.layers = list(layers)
        self.output_shapes = self._chain_shapes()

    def _chain_shapes(self) -> list[tuple[int, ...]]:
        c, h, w = self.input_shape
        if min(self.input_shape) < 1:
            raise ArchError(f"input shape must be positive, got {self.input_shape}")
        shapes: list[tuple[int, ...]] = []
        seen_flatten = False
        flat: int | None = None
        for i, layer in enumerate(self.layers):
            if isinstance(layer, ConvLayer):
                if seen_flatten:
                    raise ArchError(f"layer {i}: conv not allowed after flatten")
                try:
                    h = conv_output_size(h, layer.kernel, layer.stride, layer.pad)
                    w = conv_output_size(w, layer.kernel, layer.stride, layer.pad)
                except ShapeError as e:
                    raise ArchError(f"layer {i}: {e}") from e
                c = layer.filters
                shapes.append((c, h, w))
            elif isinstance(layer, MaxPoolLayer):
                if seen_flatten:
                    raise ArchError(f"layer {i}: maxpool not allowed after flatten")
                try:
                    h = conv_output_size(h, layer.window, layer.stride, 0)
                    w = conv_output_size(w, layer.window, layer.stride, 0)
                except ShapeError as e:
                    raise ArchError(f"layer {i}: {e}") from e
                shapes.append((c, h, w))
            elif isinstance(layer, FlattenLayer):
                if seen_flatten:
                    raise ArchError(f"layer {i}: multiple flatten layers")
                seen_flatten = True
                flat = c * h * w
                shapes.append((flat,))
            elif isinstance(layer, DenseLayer):
                if not seen_flatten:
                    raise ArchError(f"layer {i}: dense requires a preceding flatten")
                assert flat is not None
                shapes.append((layer.units,))
                flat = layer.units
            else:  # pragma: no cover
                raise ArchError(f"layer {i}: unknown layer type {layer!r}")
        if not seen_flatten:
            raise ArchError("architecture must contain exactly one flatten layer")
        if not isinstance(self.layers[-1], DenseLayer):
            raise ArchError("architecture must end with a dense layer")
        return shapes

    @property
    def flatten_index(self) -> int:
        return next(i for i, l in enumerate(self.layers) if isinstance(l, FlattenLayer))

    @property
    def feature_dim(self) -> int:
        """Width of the flattened backbone output, the head's input size."""
        return self.output_shapes[self.flatten_index][0]

    @property
    def num_classes(self) -> int:
        return self.layers[-1].units  # final dense defines the class count

    def layer_input_shape(self, index: int) -> tuple[int, ...]:
        return self.input_shape if index == 0 else self.output_shapes[index - 1]

    def weight_slots(self) -> list[WeightSlot]:
        """Every parameter tensor this architecture binds, in layer order."""
        slots: list[WeightSlot] = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, ConvLayer):
                c_in = self.layer_input_shape(i)[0]
                slots.append(
                    WeightSlot(f"{i}.kernels", (layer.filters, c_in, layer.kernel, layer.kernel), True)
                )
                slots.append(WeightSlot(f"{i}.bias", (layer.filters,), True))
            elif isinstance(layer, DenseLayer):
                d_in = self.layer_input_shape(i)[0]
                slots.append(WeightSlot(f"{i}.weights", (d_in, layer.units), False))
                slots.append(WeightSlot(f"{i}.bias", (layer.units,), False))
        return slots

    def backbone_slots(self) -> list[WeightSlot]:
        return [s for s in self.weight_slots() if s.frozen]

    def head_slots(self) -> list[WeightSlot]:
        return [s for s in self.weight_slots() if not s.frozen]

    def dense_indices(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if isinstance(l, DenseLayer)]


def _parse_int(token: str, what: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ArchError(f"line {line_no}: {what} must be an integer, got {token!r}") from None


def parse_arch(text: str) -> ArchitectureSpec:
    """Parse architecture text into a validated ArchitectureSpec."""
    input_shape: tuple[int, int, int] | None = None
    layers: list[Layer] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind, args = parts[0], parts[1:]
        if kind == "input":
            if input_shape is not None:
                raise ArchError(f"line {line_no}: duplicate input line")
            if layers:
                raise ArchError(f"line {line_no}: input must precede all layers")
            if len(args) != 3:
                raise ArchError(f"line {line_no}: expected 'input C H W'")
            input_shape = tuple(_parse_int(a, "input dim", line_no) for a in args)
        elif kind == "conv":
            if len(args) != 5 or args[4] not in ("relu", "none"):
                raise ArchError(f"line {line_no}: expected 'conv F K S P relu|none'")
            f, k, s, p = (_parse_int(a, "conv arg", line_no) for a in args[:4])
            layers.append(ConvLayer(f, k, s, p, args[4]))
        elif kind == "maxpool":
            if len(args) != 2:
                raise ArchError(f"line {line_no}: expected 'maxpool W S'")
            w, s = (_parse_int(a, "maxpool arg", line_no) for a in args)
            layers.append(MaxPoolLayer(w, s))
        elif kind == "flatten":
            if args:
                raise ArchError(f"line {line_no}: flatten takes no arguments")
            layers.append(FlattenLayer())
        elif kind == "dense":
            if len(args) != 1:
                raise ArchError(f"line {line_no}: expected 'dense U'")
            layers.append(DenseLayer(_parse_int(args[0], "dense units", line_no)))
        else:
            raise ArchError(f"line {line_no}: unknown layer kind {kind!r}")
    if input_shape is None:
        raise ArchError("missing input line")
    if not layers:
        raise ArchError("architecture has no layers")
    return ArchitectureSpec(input_shape, layers)


def load_arch(path) -> ArchitectureSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_arch(fh.read())


def default_arch() -> ArchitectureSpec:
    """The shipped VGG-16 backbone plus a 5-class dense head."""
    return parse_arch(default_arch_text())


def default_arch_text() -> str:
    return resources.files("disasterlens").joinpath("resources/vgg16.arch").read_text("utf-8")


def synthetic_arch_text() -> str:
    """A small 3-conv-block stack for 64x64 inputs, used by tests and demos."""
    return resources.files("disasterlens").joinpath("resources/smallnet.arch").read_text("utf-8")
