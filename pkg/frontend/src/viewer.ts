/** Pan/zoom image canvas with click-to-annotate and a crosshair magnifier.
 *
 * Click precision is the accuracy bottleneck of the whole calibration, so
 * the viewer zooms around the cursor and shows a magnified crosshair patch
 * while hovering.
 */

import type { Pt } from "./api.js";

export interface Marker {
  pt: Pt;
  color: string;
  label?: string;
}

const MAG_SIZE = 120; // px, on-screen magnifier patch
const MAG_SCALE = 4;

export class ImageView {
  private readonly ctx: CanvasRenderingContext2D;
  private image: HTMLImageElement | null = null;
  private scale = 1;
  private offsetX = 0;
  private offsetY = 0;
  private markers: Marker[] = [];
  private polygon: Pt[] | null = null;
  private cursor: Pt | null = null; // canvas coords
  private dragFrom: Pt | null = null;
  private moved = false;

  onClick: ((imagePt: Pt) => void) | null = null;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas not supported");
    this.ctx = ctx;
    canvas.addEventListener("wheel", (e) => this.onWheel(e), { passive: false });
    canvas.addEventListener("mousedown", (e) => {
      this.dragFrom = [e.offsetX, e.offsetY];
      this.moved = false;
    });
    canvas.addEventListener("mousemove", (e) => this.onMove(e));
    canvas.addEventListener("mouseleave", () => {
      this.cursor = null;
      this.dragFrom = null;
      this.render();
    });
    canvas.addEventListener("mouseup", (e) => {
      if (!this.moved && this.onClick && this.image) {
        this.onClick(this.toImage([e.offsetX, e.offsetY]));
      }
      this.dragFrom = null;
    });
  }

  async load(url: string): Promise<void> {
    const img = new Image();
    img.src = url;
    await img.decode();
    this.image = img;
    this.fit();
    this.render();
  }

  setMarkers(markers: Marker[]): void {
    this.markers = markers;
    this.render();
  }

  setPolygon(poly: Pt[] | null): void {
    this.polygon = poly;
    this.render();
  }

  /** image pixel -> canvas pixel */
  toCanvas(p: Pt): Pt {
    return [p[0] * this.scale + this.offsetX, p[1] * this.scale + this.offsetY];
  }

  /** canvas pixel -> image pixel */
  toImage(p: Pt): Pt {
    return [(p[0] - this.offsetX) / this.scale, (p[1] - this.offsetY) / this.scale];
  }

  private fit(): void {
    if (!this.image) return;
    const { width, height } = this.canvas;
    this.scale = Math.min(width / this.image.width, height / this.image.height);
    this.offsetX = (width - this.image.width * this.scale) / 2;
    this.offsetY = (height - this.image.height * this.scale) / 2;
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const factor = Math.exp(-e.deltaY / 400);
    const next = Math.min(Math.max(this.scale * factor, 0.05), 64);
    // zoom around the cursor: the image point under it stays put
    const k = next / this.scale;
    this.offsetX = e.offsetX - (e.offsetX - this.offsetX) * k;
    this.offsetY = e.offsetY - (e.offsetY - this.offsetY) * k;
    this.scale = next;
    this.render();
  }

  private onMove(e: MouseEvent): void {
    this.cursor = [e.offsetX, e.offsetY];
    if (this.dragFrom && e.buttons === 1) {
      this.offsetX += e.offsetX - this.dragFrom[0];
      this.offsetY += e.offsetY - this.dragFrom[1];
      this.dragFrom = [e.offsetX, e.offsetY];
      this.moved = true;
    }
    this.render();
  }

  private render(): void {
    const { ctx, canvas } = this;
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (!this.image) return;
    ctx.imageSmoothingEnabled = this.scale < 2;
    ctx.setTransform(this.scale, 0, 0, this.scale, this.offsetX, this.offsetY);
    ctx.drawImage(this.image, 0, 0);
    ctx.setTransform(1, 0, 0, 1, 0, 0);

    if (this.polygon && this.polygon.length >= 2) {
      ctx.strokeStyle = "#ffd400";
      ctx.lineWidth = 2;
      ctx.beginPath();
      const pts = this.polygon.map((p) => this.toCanvas(p));
      ctx.moveTo(pts[0][0], pts[0][1]);
      for (const p of pts.slice(1)) ctx.lineTo(p[0], p[1]);
      if (this.polygon.length === 4) ctx.closePath();
      ctx.stroke();
    }

    for (const m of this.markers) {
      const [x, y] = this.toCanvas(m.pt);
      ctx.strokeStyle = m.color;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.moveTo(x - 8, y);
      ctx.lineTo(x + 8, y);
      ctx.moveTo(x, y - 8);
      ctx.lineTo(x, y + 8);
      ctx.stroke();
      if (m.label) {
        ctx.fillStyle = m.color;
        ctx.font = "11px sans-serif";
        ctx.fillText(m.label, x + 7, y - 7);
      }
    }

    if (this.cursor) this.renderMagnifier(this.cursor);
  }

  private renderMagnifier(cursor: Pt): void {
    const { ctx } = this;
    const img = this.image!;
    const center = this.toImage(cursor);
    const src = MAG_SIZE / (MAG_SCALE * this.scale);
    const x = cursor[0] + 20;
    const y = cursor[1] - MAG_SIZE - 20 < 0 ? cursor[1] + 20 : cursor[1] - MAG_SIZE - 20;
    ctx.save();
    ctx.beginPath();
    ctx.rect(x, y, MAG_SIZE, MAG_SIZE);
    ctx.clip();
    ctx.fillStyle = "#000";
    ctx.fillRect(x, y, MAG_SIZE, MAG_SIZE);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(
      img,
      center[0] - src / 2, center[1] - src / 2, src, src,
      x, y, MAG_SIZE, MAG_SIZE,
    );
    ctx.restore();
    ctx.strokeStyle = "#fff";
    ctx.lineWidth = 1;
    ctx.strokeRect(x, y, MAG_SIZE, MAG_SIZE);
    ctx.beginPath();
    ctx.moveTo(x + MAG_SIZE / 2, y);
    ctx.lineTo(x + MAG_SIZE / 2, y + MAG_SIZE);
    ctx.moveTo(x, y + MAG_SIZE / 2);
    ctx.lineTo(x + MAG_SIZE, y + MAG_SIZE / 2);
    ctx.stroke();
  }
}
