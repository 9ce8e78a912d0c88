/** Canvas painting for candidate and output fields. */

import { unitToByte } from "./state.js";

export function drawField(
  canvas: HTMLCanvasElement,
  pixels: number[],
  height: number,
  width: number,
  displayScale = 6,
): void {
  canvas.width = width;
  canvas.height = height;
  canvas.style.width = `${width * displayScale}px`;
  canvas.style.height = `${height * displayScale}px`;
  canvas.style.imageRendering = "pixelated";
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const image = ctx.createImageData(width, height);
  for (let i = 0; i < height * width; i++) {
    const g = unitToByte(pixels[i]);
    image.data[4 * i] = g;
    image.data[4 * i + 1] = g;
    image.data[4 * i + 2] = g;
    image.data[4 * i + 3] = 255;
  }
  ctx.putImageData(image, 0, 0);
}

/** Tiny polyline sparkline for a curve column. */
export function drawSparkline(
  canvas: HTMLCanvasElement,
  values: number[],
  color = "#4477cc",
): void {
  const w = (canvas.width = 260);
  const h = (canvas.height = 60);
  const ctx = canvas.getContext("2d");
  if (!ctx || values.length === 0) return;
  ctx.clearRect(0, 0, w, h);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / (values.length - 1 || 1)) * (w - 4) + 2;
    const y = h - 4 - ((v - lo) / span) * (h - 8);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
