"""Prompt text used by the two inpainting stages.

The control-guided stage takes a positive prompt built from the selected
template's name plus a fixed quality tail, and a fixed negative prompt.
The instruction-editing stage takes a single imperative sentence; a pool of
fifty paraphrased variants is bundled for callers that want to vary the
wording (for example when building fine-tuning data).
"""

from __future__ import annotations

import dataclasses

TEMPLATE_NAME_SLOT = "[TEMPLATE NAME]"

POSITIVE_PROMPT_TEMPLATE = (
    "[TEMPLATE NAME], hand, realskin, photorealistic, RAW photo, best quality, "
    "realistic, photo-realistic, masterpiece, an extremely delicate and beautiful, "
    "extremely detailed, 2k wallpaper, Amazing, finely detailed, 8k wallpaper, "
    "huge filesize, ultra-detailed, high-res, and extremely detailed."
)

NEGATIVE_PROMPT = (
    "deformed, EasyNegative, paintings, sketches, (worst quality:2), "
    "(low quality:2), (normal quality:2), low-res, normal quality, and (monochrome)."
)

INSTRUCTION_PROMPT = "Turn the deformed hand into normal"

INSTRUCTION_VARIANTS: tuple[str, ...] = (
    "Transform the distorted hand into a regular shape",
    "Convert the abnormal hand to a normal one",
    "Change the misshapen hand into a standard form",
    "Modify the irregular hand into a typical shape",
    "Alter the twisted hand to appear normal",
    "Make the malformed hand look ordinary",
    "Adjust the deformed hand to a normal appearance",
    "Correct the unusual hand to a conventional form",
    "Revise the warped hand into a normal state",
    "Restore the irregular hand to a standard look",
    "Reshape the disfigured hand into a normal one",
    "Reform the abnormal hand into a regular shape",
    "Remodel the distorted hand to look normal",
    "Renovate the twisted hand into a standard appearance",
    "Recondition the misshapen hand into a normal state",
    "Refashion the deformed hand into a typical form",
    "Reconfigure the irregular hand to appear normal",
    "Recast the abnormal hand into a conventional shape",
    "Realign the distorted hand to a normal look",
    "Reconstruct the twisted hand into a standard form",
    "Normalize the deformed hand's appearance",
    "Rehabilitate the irregular hand to normality",
    "Refine the misshapen hand into a standard state",
    "Reorient the abnormal hand to appear normal",
    "Morph the distorted hand into a regular shape",
    "Convert the warped hand into a normal appearance",
    "Revamp the misshapen hand into a typical form",
    "Reinvent the deformed hand's look to normal",
    "Reengineer the twisted hand into a conventional shape",
    "Remake the abnormal hand into a standard form",
    "Resculpt the irregular hand into a normal look",
    "Rebuild the distorted hand to a normal state",
    "Revitalize the twisted hand into a typical shape",
    "Rework the misshapen hand to appear normal",
    "Redesign the deformed hand into a regular form",
    "Redo the abnormal hand to a standard appearance",
    "Recreate the distorted hand into a normal state",
    "Redefine the twisted hand into a typical look",
    "Reestablish the misshapen hand as normal",
    "Refurbish the irregular hand into a conventional shape",
    "Remold the deformed hand to a standard look",
    "Reawaken the abnormal hand to normality",
    "Retool the distorted hand into a regular shape",
    "Refit the twisted hand to a normal appearance",
    "Reimagine the misshapen hand into a typical form",
    "Resurrect the deformed hand into a conventional look",
    "Reenergize the irregular hand to a standard state",
    "Revise the abnormal hand to appear normal",
    "Rejuvenate the distorted hand into a regular form",
    "Reinvigorate the twisted hand to a normal state",
)


@dataclasses.dataclass(frozen=True)
class PromptBundle:
    """The full prompt set consumed by the inpainting steps."""

    positive_template: str = POSITIVE_PROMPT_TEMPLATE
    negative: str = NEGATIVE_PROMPT
    instruction: str = INSTRUCTION_PROMPT
    instruction_variants: tuple[str, ...] = INSTRUCTION_VARIANTS

    def __post_init__(self) -> None:
        if self.positive_template.count(TEMPLATE_NAME_SLOT) != 1:
            raise ValueError(
                f"positive_template must contain {TEMPLATE_NAME_SLOT!r} exactly once"
            )
        object.__setattr__(self, "instruction_variants", tuple(self.instruction_variants))
        if len(self.instruction_variants) != 50:
            raise ValueError(
                f"expected exactly 50 instruction variants, got {len(self.instruction_variants)}"
            )
        if not self.instruction:
            raise ValueError("instruction must be non-empty")

    def render_positive(self, template_name: str) -> str:
        """Fill the template-name slot of the positive prompt."""

        return self.positive_template.replace(TEMPLATE_NAME_SLOT, template_name)

    def variant(self, index: int) -> str:
        return self.instruction_variants[index]


DEFAULT_PROMPTS = PromptBundle()
