/** Test scene: 96x64 white background, red disk centered at (24, 32)
 * with radius 12, green (0,128,0) disk centered at (72, 32) radius 12. */

export const TWO_DISKS_PNG_BASE64 =
  "iVBORw0KGgoAAAANSUhEUgAAAGAAAABACAIAAABqVuVZAAABVUlEQVR4nO2bW27DMAzApl186MmzE7TU" +
  "y8kwkN+xYBGSGytoXNf1Je/5fnoDfx0FAQoCFAQoCFAQoCBAQYCCAAUBCgIUBCgIUBCgIEBBgIIABQEK" +
  "AvYERayF2iBeO/uJ0dD+g5QnvgV8kHL9NPfTFZSsl7s0JeuloanVYvluuqXv8t3U6Lu6oGrOhx1Vc64+" +
  "XxTUy/aYo95JXFpVETTJ84Cjye9Ufq3vQUBa0LwEVoto/pqTjGAFAQoCFATkBG0dH0tx1u5ZiTg5QVs3" +
  "hqU47YtVI44tBigIUBCQFjQ/PlZHH/NjKBnBCgIqgiYlcGByNimi/NpiBfXyPDZX7Dkqraq3WDXbw1PX" +
  "qqPq860zKJ/zLTPpfM6NivOrBsVc+69GxCNS3hGvWLmR7An6p/geBCgIUBCgIEBBgIIABQEKAhQEKAhQ" +
  "EKAgQEGAggAFAQoCFAQoCPgFoYJi7jft2f8AAAAASUVORK5CYII=";

export const SCENE_WIDTH = 96;
export const SCENE_HEIGHT = 64;
export const RED_DISK_CENTER: [number, number] = [24, 32];
export const GREEN_DISK_CENTER: [number, number] = [72, 32];

export function scenePngBytes(): Uint8Array {
  const raw = atob(TWO_DISKS_PNG_BASE64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  return bytes;
}

export function scenePngBlob(): Blob {
  const bytes = scenePngBytes();
  return new Blob([bytes.buffer as ArrayBuffer], { type: "image/png" });
}
