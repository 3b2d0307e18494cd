/**
 * Minimal PNG decoder for the bundle contract.
 *
 * Supports non-interlaced 8-bit grayscale/RGB/RGBA and 16-bit grayscale
 * images, which is exactly what a refocus bundle contains (8-bit color
 * `allfocus.png`, raw 16-bit `depth.png`). Canvas decoding is not an
 * option for the depth map: browsers quantize 16-bit PNGs to 8 bits and
 * the layer indices would collapse.
 */

const PNG_SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

export interface DecodedPng {
  width: number;
  height: number;
  channels: number;
  bitDepth: 8 | 16;
  /** Row-major samples, channel-interleaved; Uint16Array when bitDepth is 16. */
  data: Uint8Array | Uint16Array;
}

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([data as BlobPart])
    .stream()
    .pipeThrough(new DecompressionStream("deflate"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function unfilter(raw: Uint8Array, width: number, height: number, bpp: number): Uint8Array {
  const stride = width * bpp;
  const out = new Uint8Array(stride * height);
  let pos = 0;
  for (let y = 0; y < height; y++) {
    const filter = raw[pos++];
    const row = y * stride;
    const prev = row - stride;
    for (let x = 0; x < stride; x++) {
      const cur = raw[pos++];
      const left = x >= bpp ? out[row + x - bpp] : 0;
      const up = y > 0 ? out[prev + x] : 0;
      const upLeft = y > 0 && x >= bpp ? out[prev + x - bpp] : 0;
      let value: number;
      switch (filter) {
        case 0:
          value = cur;
          break;
        case 1:
          value = cur + left;
          break;
        case 2:
          value = cur + up;
          break;
        case 3:
          value = cur + ((left + up) >> 1);
          break;
        case 4:
          value = cur + paeth(left, up, upLeft);
          break;
        default:
          throw new Error(`unsupported PNG filter type ${filter}`);
      }
      out[row + x] = value & 0xff;
    }
  }
  return out;
}

export async function decodePng(bytes: Uint8Array): Promise<DecodedPng> {
  if (bytes.length < 8 || PNG_SIGNATURE.some((b, i) => bytes[i] !== b)) {
    throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let offset = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  const idat: Uint8Array[] = [];
  while (offset < bytes.length) {
    const length = view.getUint32(offset);
    const type = String.fromCharCode(
      bytes[offset + 4], bytes[offset + 5], bytes[offset + 6], bytes[offset + 7]
    );
    const body = bytes.subarray(offset + 8, offset + 8 + length);
    if (type === "IHDR") {
      width = view.getUint32(offset + 8);
      height = view.getUint32(offset + 12);
      bitDepth = bytes[offset + 16];
      colorType = bytes[offset + 17];
      const interlace = bytes[offset + 20];
      if (interlace !== 0) throw new Error("interlaced PNG not supported");
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    offset += 12 + length;
  }
  const channelsByColorType: Record<number, number> = { 0: 1, 2: 3, 4: 2, 6: 4 };
  const channels = channelsByColorType[colorType];
  if (channels === undefined) throw new Error(`unsupported PNG color type ${colorType}`);
  if (bitDepth !== 8 && bitDepth !== 16) {
    throw new Error(`unsupported PNG bit depth ${bitDepth}`);
  }
  if (bitDepth === 16 && colorType !== 0) {
    throw new Error("16-bit PNG support is limited to grayscale");
  }

  const compressed = new Uint8Array(idat.reduce((n, c) => n + c.length, 0));
  let pos = 0;
  for (const c of idat) {
    compressed.set(c, pos);
    pos += c.length;
  }
  const raw = await inflate(compressed);
  const bytesPerSample = bitDepth / 8;
  const bpp = channels * bytesPerSample;
  const unfiltered = unfilter(raw, width, height, bpp);

  if (bitDepth === 8) {
    return { width, height, channels, bitDepth: 8, data: unfiltered };
  }
  const samples = new Uint16Array(width * height);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = (unfiltered[2 * i] << 8) | unfiltered[2 * i + 1];
  }
  return { width, height, channels: 1, bitDepth: 16, data: samples };
}
