"""Gate circuits to measurement-only programs, plus a dense executor."""

from .execute import ExecutionResult, TraceEntry, execute
from .frame import AbsorbResult, PauliFrame, absorb_frame
from .io import FormatError, dump_program, load_circuit, load_program
from .ir import (
    AbsorbRule,
    FrameRule,
    Gate,
    GateCircuit,
    MeasurementProgram,
    ProgramMeasurement,
    RepeatBlock,
)
from .lowering import MODES, CompileMode, compile_circuit
from .verify import VerifyReport, enumerate_branches, verify

__all__ = [
    "AbsorbResult", "AbsorbRule", "CompileMode", "ExecutionResult", "FormatError", "FrameRule",
    "Gate", "GateCircuit", "MODES", "MeasurementProgram", "PauliFrame", "ProgramMeasurement",
    "RepeatBlock", "TraceEntry", "VerifyReport", "absorb_frame", "compile_circuit",
    "dump_program", "enumerate_branches", "execute", "load_circuit", "load_program", "verify",
]
