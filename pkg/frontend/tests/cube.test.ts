/* Cube preview: artifact on the front face, nearest-neighbor sampling,
 * single upload per artifact, and a 2D fallback when WebGL is missing. */

import { describe, expect, it } from "vitest";

import { createCubePreview, PixelTexture } from "../src/cube.js";

// Real WebGL enum values so arithmetic like TEXTURE0 + 1 stays valid.
const GL = {
  DEPTH_TEST: 0x0b71, TEXTURE_2D: 0x0de1, RGBA: 0x1908, UNSIGNED_BYTE: 0x1401,
  NEAREST: 0x2600, TEXTURE_MAG_FILTER: 0x2800, TEXTURE_MIN_FILTER: 0x2801,
  TEXTURE_WRAP_S: 0x2802, TEXTURE_WRAP_T: 0x2803, CLAMP_TO_EDGE: 0x812f,
  FRAGMENT_SHADER: 0x8b30, VERTEX_SHADER: 0x8b31, COMPILE_STATUS: 0x8b81,
  LINK_STATUS: 0x8b82, ARRAY_BUFFER: 0x8892, STATIC_DRAW: 0x88e4,
  FLOAT: 0x1406, TEXTURE0: 0x84c0, TRIANGLES: 0x0004,
  COLOR_BUFFER_BIT: 0x4000, DEPTH_BUFFER_BIT: 0x0100,
};

interface TexParamCall {
  texture: object | null;
  pname: number;
  param: number;
}

interface UploadCall {
  texture: object | null;
  pixels: Uint8Array | null;
}

function makeGlStub() {
  const texParams: TexParamCall[] = [];
  const uploads: UploadCall[] = [];
  let drawCalls = 0;
  let bound: object | null = null;
  let attrib = 0;

  const gl = {
    ...GL,
    createShader: () => ({}),
    shaderSource: () => {},
    compileShader: () => {},
    getShaderParameter: () => true,
    getShaderInfoLog: () => "",
    createProgram: () => ({}),
    attachShader: () => {},
    linkProgram: () => {},
    getProgramParameter: () => true,
    getProgramInfoLog: () => "",
    useProgram: () => {},
    getAttribLocation: () => attrib++ % 3,
    getUniformLocation: () => ({}),
    uniform1i: () => {},
    uniformMatrix4fv: () => {},
    createBuffer: () => ({}),
    bindBuffer: () => {},
    bufferData: () => {},
    enableVertexAttribArray: () => {},
    vertexAttribPointer: () => {},
    enable: () => {},
    viewport: () => {},
    clearColor: () => {},
    clear: () => {},
    activeTexture: () => {},
    createTexture: () => ({}),
    bindTexture: (_target: number, texture: object | null) => {
      bound = texture;
    },
    texParameteri: (_target: number, pname: number, param: number) => {
      texParams.push({ texture: bound, pname, param });
    },
    texImage2D: (...args: unknown[]) => {
      const last = args[args.length - 1];
      uploads.push({
        texture: bound,
        pixels: last instanceof Uint8Array ? last : null,
      });
    },
    drawArrays: () => {
      drawCalls++;
    },
    deleteBuffer: () => {},
    deleteTexture: () => {},
    deleteProgram: () => {},
  } as unknown as WebGLRenderingContext;

  return {
    gl,
    texParams,
    uploads,
    drawCalls: () => drawCalls,
  };
}

function solidFace(size: number, rgba: [number, number, number, number]): PixelTexture {
  const data = new Uint8ClampedArray(size * size * 4);
  for (let i = 0; i < size * size; i++) data.set(rgba, i * 4);
  return { width: size, height: size, data };
}

function canvas(): HTMLCanvasElement {
  const node = document.createElement("canvas");
  node.width = 256;
  node.height = 256;
  return node;
}

describe("fallback", () => {
  it("uses the 2D mode when no WebGL context is available", () => {
    const preview = createCubePreview(canvas(), { getContext: () => null });
    expect(preview.mode).toBe("2d");
  });

  it("uses the 2D mode when context creation throws", () => {
    const preview = createCubePreview(canvas(), {
      getContext: () => {
        throw new Error("webgl disabled");
      },
    });
    expect(preview.mode).toBe("2d");
  });

  it("still rasterizes the front face in 2D mode", () => {
    const preview = createCubePreview(canvas(), { getContext: () => null });
    preview.setTextures(solidFace(8, [255, 0, 0, 255]), null);
    const raster = preview.rasterizeFront(4)!;
    expect(raster.length).toBe(32 * 32 * 4);
    for (let i = 0; i < raster.length; i += 4) {
      expect([raster[i], raster[i + 1], raster[i + 2], raster[i + 3]]).toEqual([255, 0, 0, 255]);
    }
  });
});

describe("webgl path", () => {
  it("samples both textures with nearest-neighbor filtering", () => {
    const stub = makeGlStub();
    const preview = createCubePreview(canvas(), { getContext: () => stub.gl });
    expect(preview.mode).toBe("webgl");
    preview.setTextures(solidFace(8, [255, 0, 0, 255]), solidFace(64, [0, 255, 0, 255]));

    const filters = stub.texParams.filter(
      (call) => call.pname === GL.TEXTURE_MIN_FILTER || call.pname === GL.TEXTURE_MAG_FILTER,
    );
    const textures = new Set(filters.map((call) => call.texture));
    expect(textures.size).toBe(2);
    expect(filters.every((call) => call.param === GL.NEAREST)).toBe(true);
    for (const texture of textures) {
      const mine = filters.filter((call) => call.texture === texture);
      expect(mine.some((call) => call.pname === GL.TEXTURE_MIN_FILTER)).toBe(true);
      expect(mine.some((call) => call.pname === GL.TEXTURE_MAG_FILTER)).toBe(true);
    }
  });

  it("uploads the artifact bytes for the front face", () => {
    const stub = makeGlStub();
    const preview = createCubePreview(canvas(), { getContext: () => stub.gl });
    preview.setTextures(solidFace(8, [255, 0, 0, 255]), solidFace(64, [10, 20, 30, 255]));

    const facePayload = stub.uploads.find(
      (call) => call.pixels !== null && call.pixels.length === 8 * 8 * 4,
    );
    expect(facePayload).toBeDefined();
    for (let i = 0; i < facePayload!.pixels!.length; i += 4) {
      expect(facePayload!.pixels![i]).toBe(255);
      expect(facePayload!.pixels![i + 1]).toBe(0);
      expect(facePayload!.pixels![i + 2]).toBe(0);
    }
  });

  it("re-renders on rotation without re-uploading textures", () => {
    const stub = makeGlStub();
    const preview = createCubePreview(canvas(), { getContext: () => stub.gl });
    preview.setTextures(solidFace(8, [255, 0, 0, 255]), solidFace(64, [10, 20, 30, 255]));
    const uploadsAfterSet = stub.uploads.length;

    for (let i = 0; i < 5; i++) {
      preview.setRotation(0.1 * i, 0.2 * i);
      preview.render();
    }

    expect(stub.uploads.length).toBe(uploadsAfterSet);
    expect(stub.drawCalls()).toBe(5);
  });
});

describe("front-face snapshot", () => {
  it("magnifies pixels by copying, never blending", () => {
    const stub = makeGlStub();
    const preview = createCubePreview(canvas(), { getContext: () => stub.gl });
    const face: PixelTexture = {
      width: 2,
      height: 2,
      data: new Uint8ClampedArray([
        255, 0, 0, 255,   0, 255, 0, 255,
        0, 0, 255, 255,   255, 255, 0, 255,
      ]),
    };
    preview.setTextures(face, null);

    const raster = preview.rasterizeFront(2)!;
    const expected = new Uint8ClampedArray([
      255, 0, 0, 255,  255, 0, 0, 255,   0, 255, 0, 255,  0, 255, 0, 255,
      255, 0, 0, 255,  255, 0, 0, 255,   0, 255, 0, 255,  0, 255, 0, 255,
      0, 0, 255, 255,  0, 0, 255, 255,   255, 255, 0, 255,  255, 255, 0, 255,
      0, 0, 255, 255,  0, 0, 255, 255,   255, 255, 0, 255,  255, 255, 0, 255,
    ]);
    expect(Array.from(raster)).toEqual(Array.from(expected));
  });

  it("renders an all-red artifact as an all-red front face", () => {
    const preview = createCubePreview(canvas(), { getContext: () => makeGlStub().gl });
    preview.setTextures(solidFace(8, [255, 0, 0, 255]), null);

    const raster = preview.rasterizeFront(8)!;
    expect(raster.length).toBe(64 * 64 * 4);
    for (let i = 0; i < raster.length; i += 4) {
      expect(raster[i]).toBe(255);
      expect(raster[i + 1]).toBe(0);
      expect(raster[i + 2]).toBe(0);
      expect(raster[i + 3]).toBe(255);
    }
  });
});
