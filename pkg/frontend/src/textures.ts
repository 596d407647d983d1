/** Presentation helpers.
 *
 * The studio never computes model math: every pixel comes from service
 * bytes, and these helpers only move those bytes to the screen or disk.
 */

const objectUrls = new WeakMap<HTMLImageElement, string>();

/** Show service bytes in an <img>, nearest-neighbor magnified. */
export function displayBlob(img: HTMLImageElement, blob: Blob): void {
  const previous = objectUrls.get(img);
  if (previous) URL.revokeObjectURL(previous);
  const url = URL.createObjectURL(blob);
  objectUrls.set(img, url);
  img.src = url;
  img.style.imageRendering = "pixelated";
}

export async function blobBytes(blob: Blob): Promise<Uint8Array> {
  return new Uint8Array(await blob.arrayBuffer());
}

/** Pure nearest-neighbor upscale of square RGBA pixels: source pixel
 * (floor(x/scale), floor(y/scale)) is copied verbatim, never blended. */
export function nearestNeighborScale(
  rgba: Uint8ClampedArray,
  size: number,
  scale: number,
): Uint8ClampedArray {
  const side = size * scale;
  const out = new Uint8ClampedArray(side * side * 4);
  for (let y = 0; y < side; y++) {
    const sy = Math.floor(y / scale);
    for (let x = 0; x < side; x++) {
      const sx = Math.floor(x / scale);
      const src = (sy * size + sx) * 4;
      const dst = (y * side + x) * 4;
      out[dst] = rgba[src];
      out[dst + 1] = rgba[src + 1];
      out[dst + 2] = rgba[src + 2];
      out[dst + 3] = rgba[src + 3];
    }
  }
  return out;
}

/** Trigger a browser download of exactly these bytes. Returns the blob so
 * callers can verify what was saved. */
export function saveBlob(blob: Blob, filename: string, doc: Document = document): Blob {
  const anchor = doc.createElement("a");
  const url = URL.createObjectURL(blob);
  anchor.href = url;
  anchor.download = filename;
  doc.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
  return blob;
}
