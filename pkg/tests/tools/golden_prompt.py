"""Independent assembly of the golden prompt from the raw table cells.

The cells below are kept exactly as the table renders them: HTML wrappers,
literal backslash-n escapes and spaced chat markers. ``assemble`` undoes that
rendering without touching the package's prompt assets, and
``python3 tests/tools/golden_prompt.py`` rewrites tests/data/golden_prompt.txt.
"""

import re
from pathlib import Path

PREFIX_CELL = "< User >[BEGIN TRANSCRIPT]\\n"
POSTFIX_CELL = '<p>\\n[END TRANSCRIPT]\\n</p> <p>The Non-Technical Skills for Surgeons is a behavioral assessment tool for evaluation and improvement of behaviors in the operating room. The tool outlines four distinct categories of non-technical skills, each with corresponding elements that define the category.\\n</p> <p>These categories and their elements are as follows:\\n</p> <ul style="list-style-type: none"> - Situational awareness as evidenced by gathering surgery related information, understanding information, projecting and anticipating future state\\n - Decision making as evidenced by considering options, selecting and communicating option, and implementing and reviewing decisions\\n - Communication and teamwork as evidenced by establishing a shared understanding of and coordinating surgical team activities\\n - Leadership as evidenced by setting and maintaining standards for the surgical team, coping with pressure, and supporting others\\n <p>\\n\\n</p> <p>Your goal is to complete the following tasks that compound upon themselves. Complete them in order and think carefully about your responses.\\n</p> <ol style="list-style-type: none"> 1) Use the transcript of the simulated surgical environment to observe for demonstration of the non-technical skills within the surgical team as described by the Non-Technical Skills for Surgeons behavioral assessment tool. Apply the assessment tool to each of the participants, even if they are not playing the role of a surgeon.\\n 2) Check your response for accuracy. Make corrections if needed.\\n 3) Create a directional network based on the results of the assessment. Use the following rules for the creation of the directional network: The nodes of the network are the participants and the edges are the results from the assessment. The source node for each edge is the participant demonstrating the non-technical skill. The destination node for each edge is the other participant involved in the demonstration. The label for each edge is the non-technical skill being demonstrated. The description for each edge is a timestamp referencing where the demonstration occurs in the source transcript along with a short explanation. Create the network in a JSON format, suitable for importing into a network visualization tool.< Assistant > < think>'

MARKERS = {
    "< User >": "<\uff5cUser\uff5c>",
    "< Assistant > < think>": "<\uff5cAssistant\uff5c><think>",
}


def unrender(cell: str) -> str:
    for shown, token in MARKERS.items():
        cell = cell.replace(shown, token)
    cell = re.sub(r"\s*</?(?:p|ul|ol)(?:\s[^>]*)?>\s*", "", cell)
    cell = cell.replace("\\n", "\n")
    # the table joins list items with "\n " so drop the space after each break
    return cell.replace("\n ", "\n")


def assemble(transcript: str) -> str:
    return unrender(PREFIX_CELL) + transcript + unrender(POSTFIX_CELL)


if __name__ == "__main__":
    data = Path(__file__).resolve().parent.parent / "data"
    transcript = (data / "fixture_transcript" / "transcript.txt").read_bytes().decode("utf-8")
    (data / "golden_prompt.txt").write_bytes(assemble(transcript).encode("utf-8"))
