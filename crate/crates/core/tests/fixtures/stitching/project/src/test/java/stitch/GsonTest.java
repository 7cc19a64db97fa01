package stitch;

import static org.junit.Assert.assertEquals;

import org.junit.Test;

public class GsonTest {

    @Test
    public void testDescribe() {
        Inventory.put("nuts", 3);
        Inventory.put("bolts", 5);
        assertEquals("{\"nuts\":3,\"bolts\":5}", Inventory.describe());
    }
}
