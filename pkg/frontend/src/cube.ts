/** Rotating cube-head preview.
 *
 * The front face shows the artifact texture; the other five sample the head
 * regions of the base skin. Both textures upload once per artifact with
 * nearest-neighbor filtering, so rotation only redraws, it never re-fetches
 * or re-uploads. Falls back to a flat 2D face preview when no WebGL context
 * is available.
 */

import { nearestNeighborScale } from "./textures.js";

export interface PixelTexture {
  width: number;
  height: number;
  data: Uint8ClampedArray;
}

export type TextureSource = PixelTexture | TexImageSource;

export interface CubePreview {
  readonly mode: "webgl" | "2d";
  /** Upload the artifact face and the base skin (may be null). */
  setTextures(face: TextureSource | null, skin: TextureSource | null): void;
  setRotation(rx: number, ry: number): void;
  render(): void;
  /** Front face as raw RGBA at the given integer scale, when the face was
   * provided as raw pixels; presentation-only nearest-neighbor sampling. */
  rasterizeFront(scale: number): Uint8ClampedArray | null;
  dispose(): void;
}

export interface CubeOptions {
  getContext?: (canvas: HTMLCanvasElement) => WebGLRenderingContext | null;
}

function isPixelTexture(source: TextureSource): source is PixelTexture {
  return (
    typeof source === "object" &&
    source !== null &&
    "data" in source &&
    (source as PixelTexture).data instanceof Uint8ClampedArray
  );
}

// --- minimal column-major mat4 helpers ---

function mat4Multiply(a: Float32Array, b: Float32Array): Float32Array {
  const out = new Float32Array(16);
  for (let col = 0; col < 4; col++) {
    for (let row = 0; row < 4; row++) {
      let sum = 0;
      for (let k = 0; k < 4; k++) sum += a[k * 4 + row] * b[col * 4 + k];
      out[col * 4 + row] = sum;
    }
  }
  return out;
}

function mat4RotationX(angle: number): Float32Array {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  return new Float32Array([1, 0, 0, 0, 0, c, s, 0, 0, -s, c, 0, 0, 0, 0, 1]);
}

function mat4RotationY(angle: number): Float32Array {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  return new Float32Array([c, 0, -s, 0, 0, 1, 0, 0, s, 0, c, 0, 0, 0, 0, 1]);
}

function mat4Perspective(fovY: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(fovY / 2);
  const range = near - far;
  const out = new Float32Array(16);
  out[0] = f / aspect;
  out[5] = f;
  out[10] = (near + far) / range;
  out[11] = -1;
  out[14] = (2 * near * far) / range;
  return out;
}

function mat4Translation(z: number): Float32Array {
  const out = new Float32Array([1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, z, 1]);
  return out;
}

// --- geometry ---

// Head-atlas pixel rectangles in the skin texture (same top-left layout for
// 64x64 and 64x32 skins): [x0, y0, x1, y1].
const HEAD_REGIONS: Record<string, [number, number, number, number]> = {
  top: [8, 0, 16, 8],
  bottom: [16, 0, 24, 8],
  right: [0, 8, 8, 16],
  front: [8, 8, 16, 16],
  left: [16, 8, 24, 16],
  back: [24, 8, 32, 16],
};

interface FaceSpec {
  corners: number[][]; // 4 positions, CCW from the outside
  region: keyof typeof HEAD_REGIONS;
  layer: number; // 0 = artifact texture, 1 = skin texture
}

const FACES: FaceSpec[] = [
  // front (+z): the artifact face
  { corners: [[-1, 1, 1], [1, 1, 1], [1, -1, 1], [-1, -1, 1]], region: "front", layer: 0 },
  { corners: [[1, 1, -1], [-1, 1, -1], [-1, -1, -1], [1, -1, -1]], region: "back", layer: 1 },
  { corners: [[-1, 1, -1], [1, 1, -1], [1, 1, 1], [-1, 1, 1]], region: "top", layer: 1 },
  { corners: [[-1, -1, 1], [1, -1, 1], [1, -1, -1], [-1, -1, -1]], region: "bottom", layer: 1 },
  { corners: [[-1, 1, -1], [-1, 1, 1], [-1, -1, 1], [-1, -1, -1]], region: "right", layer: 1 },
  { corners: [[1, 1, 1], [1, 1, -1], [1, -1, -1], [1, -1, 1]], region: "left", layer: 1 },
];

function buildVertexData(skinWidth: number, skinHeight: number): Float32Array {
  // Interleaved: position (3), uv (2), layer (1); two triangles per face.
  const verts: number[] = [];
  for (const face of FACES) {
    const [x0, y0, x1, y1] = HEAD_REGIONS[face.region];
    const uv =
      face.layer === 0
        ? [[0, 0], [1, 0], [1, 1], [0, 1]]
        : [
            [x0 / skinWidth, y0 / skinHeight],
            [x1 / skinWidth, y0 / skinHeight],
            [x1 / skinWidth, y1 / skinHeight],
            [x0 / skinWidth, y1 / skinHeight],
          ];
    for (const idx of [0, 1, 2, 0, 2, 3]) {
      verts.push(...face.corners[idx], ...uv[idx], face.layer);
    }
  }
  return new Float32Array(verts);
}

const VERTEX_SHADER = `
attribute vec3 a_position;
attribute vec2 a_uv;
attribute float a_layer;
uniform mat4 u_mvp;
varying vec2 v_uv;
varying float v_layer;
void main() {
  gl_Position = u_mvp * vec4(a_position, 1.0);
  v_uv = a_uv;
  v_layer = a_layer;
}
`;

const FRAGMENT_SHADER = `
precision mediump float;
varying vec2 v_uv;
varying float v_layer;
uniform sampler2D u_face;
uniform sampler2D u_skin;
void main() {
  vec4 face = texture2D(u_face, v_uv);
  vec4 skin = texture2D(u_skin, v_uv);
  gl_FragColor = v_layer < 0.5 ? face : skin;
}
`;

class WebglCubePreview implements CubePreview {
  readonly mode = "webgl" as const;
  private rx = -0.35;
  private ry = 0.65;
  private facePixels: PixelTexture | null = null;
  private readonly program: WebGLProgram;
  private readonly buffer: WebGLBuffer;
  private readonly faceTexture: WebGLTexture;
  private readonly skinTexture: WebGLTexture;
  private readonly mvpLocation: WebGLUniformLocation | null;
  private vertexCount = 0;

  constructor(
    private readonly gl: WebGLRenderingContext,
    private readonly canvas: HTMLCanvasElement,
  ) {
    this.program = this.buildProgram();
    this.buffer = gl.createBuffer()!;
    this.faceTexture = this.createNearestTexture();
    this.skinTexture = this.createNearestTexture();
    this.mvpLocation = gl.getUniformLocation(this.program, "u_mvp");
    gl.useProgram(this.program);
    gl.uniform1i(gl.getUniformLocation(this.program, "u_face"), 0);
    gl.uniform1i(gl.getUniformLocation(this.program, "u_skin"), 1);
    gl.enable(gl.DEPTH_TEST);
    this.uploadGeometry(64, 64);
  }

  private buildProgram(): WebGLProgram {
    const gl = this.gl;
    const compile = (kind: number, source: string): WebGLShader => {
      const shader = gl.createShader(kind)!;
      gl.shaderSource(shader, source);
      gl.compileShader(shader);
      if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
        throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
      }
      return shader;
    };
    const program = gl.createProgram()!;
    gl.attachShader(program, compile(gl.VERTEX_SHADER, VERTEX_SHADER));
    gl.attachShader(program, compile(gl.FRAGMENT_SHADER, FRAGMENT_SHADER));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
    }
    return program;
  }

  private createNearestTexture(): WebGLTexture {
    const gl = this.gl;
    const texture = gl.createTexture()!;
    gl.bindTexture(gl.TEXTURE_2D, texture);
    // Crisp pixels: nearest-neighbor sampling, no smoothing.
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_S, gl.CLAMP_TO_EDGE);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_T, gl.CLAMP_TO_EDGE);
    gl.texImage2D(
      gl.TEXTURE_2D, 0, gl.RGBA, 1, 1, 0, gl.RGBA, gl.UNSIGNED_BYTE,
      new Uint8Array([128, 128, 128, 255]),
    );
    return texture;
  }

  private uploadGeometry(skinWidth: number, skinHeight: number): void {
    const gl = this.gl;
    const data = buildVertexData(skinWidth, skinHeight);
    this.vertexCount = data.length / 6;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.buffer);
    gl.bufferData(gl.ARRAY_BUFFER, data, gl.STATIC_DRAW);
    const stride = 6 * 4;
    const position = gl.getAttribLocation(this.program, "a_position");
    const uv = gl.getAttribLocation(this.program, "a_uv");
    const layer = gl.getAttribLocation(this.program, "a_layer");
    gl.enableVertexAttribArray(position);
    gl.vertexAttribPointer(position, 3, gl.FLOAT, false, stride, 0);
    gl.enableVertexAttribArray(uv);
    gl.vertexAttribPointer(uv, 2, gl.FLOAT, false, stride, 3 * 4);
    gl.enableVertexAttribArray(layer);
    gl.vertexAttribPointer(layer, 1, gl.FLOAT, false, stride, 5 * 4);
  }

  private upload(texture: WebGLTexture, unit: number, source: TextureSource): void {
    const gl = this.gl;
    gl.activeTexture(gl.TEXTURE0 + unit);
    gl.bindTexture(gl.TEXTURE_2D, texture);
    if (isPixelTexture(source)) {
      gl.texImage2D(
        gl.TEXTURE_2D, 0, gl.RGBA, source.width, source.height, 0,
        gl.RGBA, gl.UNSIGNED_BYTE, new Uint8Array(source.data.buffer.slice(0)),
      );
    } else {
      gl.texImage2D(gl.TEXTURE_2D, 0, gl.RGBA, gl.RGBA, gl.UNSIGNED_BYTE, source);
    }
  }

  setTextures(face: TextureSource | null, skin: TextureSource | null): void {
    if (face !== null) {
      this.facePixels = isPixelTexture(face) ? face : null;
      this.upload(this.faceTexture, 0, face);
    }
    const skinSource = skin ?? face;
    if (skinSource !== null) {
      if (isPixelTexture(skinSource)) this.uploadGeometry(skinSource.width, skinSource.height);
      this.upload(this.skinTexture, 1, skinSource);
    }
  }

  setRotation(rx: number, ry: number): void {
    this.rx = rx;
    this.ry = ry;
  }

  render(): void {
    const gl = this.gl;
    const width = this.canvas.width || 256;
    const height = this.canvas.height || 256;
    gl.viewport(0, 0, width, height);
    gl.clearColor(0.12, 0.12, 0.14, 1);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    gl.useProgram(this.program);
    const model = mat4Multiply(mat4RotationX(this.rx), mat4RotationY(this.ry));
    const view = mat4Translation(-4.0);
    const projection = mat4Perspective(Math.PI / 5, width / height, 0.1, 50);
    const mvp = mat4Multiply(projection, mat4Multiply(view, model));
    gl.uniformMatrix4fv(this.mvpLocation, false, mvp);
    gl.activeTexture(gl.TEXTURE0);
    gl.bindTexture(gl.TEXTURE_2D, this.faceTexture);
    gl.activeTexture(gl.TEXTURE1);
    gl.bindTexture(gl.TEXTURE_2D, this.skinTexture);
    gl.drawArrays(gl.TRIANGLES, 0, this.vertexCount);
  }

  rasterizeFront(scale: number): Uint8ClampedArray | null {
    if (!this.facePixels) return null;
    return nearestNeighborScale(this.facePixels.data, this.facePixels.width, scale);
  }

  dispose(): void {
    const gl = this.gl;
    gl.deleteBuffer(this.buffer);
    gl.deleteTexture(this.faceTexture);
    gl.deleteTexture(this.skinTexture);
    gl.deleteProgram(this.program);
  }
}

class FlatCubePreview implements CubePreview {
  readonly mode = "2d" as const;
  private facePixels: PixelTexture | null = null;
  private faceImage: TexImageSource | null = null;

  constructor(private readonly canvas: HTMLCanvasElement) {}

  setTextures(face: TextureSource | null, _skin: TextureSource | null): void {
    if (face === null) return;
    if (isPixelTexture(face)) {
      this.facePixels = face;
      this.faceImage = null;
    } else {
      this.faceImage = face;
      this.facePixels = null;
    }
  }

  setRotation(_rx: number, _ry: number): void {
    // Flat preview: rotation is a no-op but must never fetch or upload.
  }

  render(): void {
    let context: CanvasRenderingContext2D | null = null;
    try {
      context = this.canvas.getContext("2d");
    } catch {
      context = null;
    }
    if (!context) return;
    const side = Math.min(this.canvas.width, this.canvas.height) || 256;
    context.imageSmoothingEnabled = false;
    if (this.facePixels) {
      const scale = Math.max(1, Math.floor(side / this.facePixels.width));
      const raster = this.rasterizeFront(scale)!;
      const pixels = this.facePixels.width * scale;
      const image = context.createImageData(pixels, pixels);
      image.data.set(raster);
      context.putImageData(image, 0, 0);
    } else if (this.faceImage) {
      context.drawImage(this.faceImage as CanvasImageSource, 0, 0, side, side);
    }
  }

  rasterizeFront(scale: number): Uint8ClampedArray | null {
    if (!this.facePixels) return null;
    return nearestNeighborScale(this.facePixels.data, this.facePixels.width, scale);
  }

  dispose(): void {}
}

function obtainWebgl(
  canvas: HTMLCanvasElement,
  options: CubeOptions,
): WebGLRenderingContext | null {
  try {
    if (options.getContext) return options.getContext(canvas);
    return (canvas.getContext("webgl") ??
      canvas.getContext("experimental-webgl")) as WebGLRenderingContext | null;
  } catch {
    return null;
  }
}

/** Build the 3D preview, or the flat 2D fallback when WebGL is unavailable. */
export function createCubePreview(canvas: HTMLCanvasElement, options: CubeOptions = {}): CubePreview {
  const gl = obtainWebgl(canvas, options);
  if (gl) {
    try {
      return new WebglCubePreview(gl, canvas);
    } catch {
      return new FlatCubePreview(canvas);
    }
  }
  return new FlatCubePreview(canvas);
}

/** Pointer-drag rotation; re-renders but never refetches. */
export function attachDragRotation(canvas: HTMLCanvasElement, preview: CubePreview): void {
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  let rx = -0.35;
  let ry = 0.65;
  canvas.addEventListener("pointerdown", (event) => {
    dragging = true;
    lastX = event.clientX;
    lastY = event.clientY;
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!dragging) return;
    ry += (event.clientX - lastX) * 0.01;
    rx += (event.clientY - lastY) * 0.01;
    lastX = event.clientX;
    lastY = event.clientY;
    preview.setRotation(rx, ry);
    preview.render();
  });
  for (const kind of ["pointerup", "pointerleave"] as const) {
    canvas.addEventListener(kind, () => {
      dragging = false;
    });
  }
}
