"""Instruction templates sent to hosted model backends.

These strings are the workflow's fixed scaffolding; tests pin them verbatim,
so change them only together with the template-fidelity tests.
"""

from __future__ import annotations

# Frame rate at which the describer backend is asked to analyse the source
# video before writing the initial prompt.
ANALYSIS_FPS = 16

_INITIAL_INSTRUCTION = (
    "Reverse engineer the {time-duration} second video to create a clear and "
    "descriptive prompt that can be used to reproduce the video with a "
    "text-to-video model. Return the prompt only. Include temporal sequencing."
)

_ASSIST_STARTER = (
    "I want to repurpose my video. My goal is to {creative goal}. "
    "Here is the text-to-video prompt of my original video: {prompt}. "
    "Help me rewrite the prompt…"
)

# The mid-template ellipsis is deliberate: the scaffold leaves room between
# stating the goal and the image-editing request for the user to elaborate.
_FIRST_FRAME_REQUEST = (
    "I want to repurpose my video. My goal is {creative goal}... "
    "Suggest an image-editing prompt to get the first frame of my new video."
)


def initial_instruction(duration_seconds: float) -> str:
    """Describer instruction with the clip length substituted (one decimal)."""
    return _INITIAL_INSTRUCTION.replace("{time-duration}", f"{duration_seconds:.1f}")


def assist_starter(creative_goal: str, prompt_text: str) -> str:
    """First chat message scaffold: goal plus the current prompt."""
    return _ASSIST_STARTER.replace("{creative goal}", creative_goal).replace(
        "{prompt}", prompt_text
    )


def first_frame_request(creative_goal: str) -> str:
    """Scaffold asking the assistant for an image-editing instruction."""
    return _FIRST_FRAME_REQUEST.replace("{creative goal}", creative_goal)
