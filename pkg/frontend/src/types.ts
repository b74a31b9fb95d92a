export type StrokeMode = "draw" | "erase";

export interface Stroke {
  mode: StrokeMode;
  width: number;
  points: [number, number][]; // image pixel coordinates
}

export interface ImageEntry {
  id: string;
  thumbnail_url: string;
  status: "new" | "in-progress";
}

export interface TracingRecord {
  image_id: string;
  annotator: string;
  status: "in-progress" | "submitted";
  strokes: Stroke[];
}
