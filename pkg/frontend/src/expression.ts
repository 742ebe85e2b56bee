/** Face indicator for the robot's expression cues.
 *
 * The cue list arrives with a chat reply; the first recognized name
 * decides the face and anything unrecognized leaves it neutral.
 */

export type Face = "happy" | "sad" | "angry" | "neutral";

const FACE_BY_CUE: Record<string, Face> = {
  greet: "happy",
  pleased: "happy",
  sad: "sad",
  angry: "angry",
};

export const FACE_GLYPHS: Record<Face, string> = {
  happy: "\u{1F60A}",
  sad: "\u{1F622}",
  angry: "\u{1F620}",
  neutral: "\u{1F610}",
};

export function faceFor(cue: readonly string[] | null | undefined): Face {
  for (const name of cue ?? []) {
    const face = FACE_BY_CUE[name];
    if (face !== undefined) return face;
  }
  return "neutral";
}
