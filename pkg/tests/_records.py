"""Synthetic evaluation records for selection and report tests."""

from phaseorder.catalog import Origin, PassCatalog
from phaseorder.meter import MeasurementSample
from phaseorder.runner import EvaluationRecord, ExecConfig, RecordStatus
from phaseorder.toolchain import CompileOutcome, CompileStatus
from phaseorder.validate import Verdict

CAT = PassCatalog.from_names([f"-p{i}" for i in range(8)])
OK_BUILD = CompileOutcome(CompileStatus.OK, binary_path="/bin/true")
CORRECT = Verdict(True, 0.0, 1)


def make_record(index, energy, time_ms=100.0, kernel="k", phase="model", valid=True,
                exec=ExecConfig(), level=None, reps=1, key=None):
    if not valid:
        return EvaluationRecord(kernel, exec, CAT.from_indices([index % 8], Origin.MODEL),
                                compile=CompileOutcome(CompileStatus.TOOL_ERROR, stage="optimizer"),
                                status=RecordStatus.COMPILE_FAILED, phase=phase, index=index,
                                key=key or f"{kernel}-{phase}-{index}")
    seq = None if level else CAT.from_indices([index % 8, (index // 8) % 8], Origin.MODEL)
    return EvaluationRecord(kernel, exec, seq, level, OK_BUILD, CORRECT,
                            [MeasurementSample(energy, time_ms) for _ in range(reps)],
                            phase=phase, index=index, key=key or f"{kernel}-{phase}-{index}")
