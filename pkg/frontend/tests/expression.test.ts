import { describe, expect, it } from "vitest";

import { FACE_GLYPHS, faceFor } from "../src/expression.js";

describe("faceFor", () => {
  it("maps greet and pleased to happy", () => {
    expect(faceFor(["greet", "pleased"])).toBe("happy");
    expect(faceFor(["pleased"])).toBe("happy");
  });

  it("maps sad to sad", () => {
    expect(faceFor(["sad"])).toBe("sad");
  });

  it("maps angry to angry", () => {
    expect(faceFor(["angry"])).toBe("angry");
  });

  it("defaults to neutral without a cue", () => {
    expect(faceFor(null)).toBe("neutral");
    expect(faceFor(undefined)).toBe("neutral");
    expect(faceFor([])).toBe("neutral");
  });

  it("leaves unknown names neutral", () => {
    expect(faceFor(["wave"])).toBe("neutral");
  });

  it("first recognized name wins", () => {
    expect(faceFor(["wave", "sad", "greet"])).toBe("sad");
  });
});

describe("FACE_GLYPHS", () => {
  it("covers every face", () => {
    for (const face of ["happy", "sad", "angry", "neutral"] as const) {
      expect(FACE_GLYPHS[face].length).toBeGreaterThan(0);
    }
  });
});
